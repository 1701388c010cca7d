//! Variance and sample-complexity bounds for the mixed-state shadow
//! estimators, and Monte Carlo audits against them.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::HamiltonianSpectrum;
use crate::error::{out_of_range, OtocError, Result};
use crate::estimators::{
    estimate_c4_mixed, estimate_c8_mixed, estimate_l8_mixed, factorized_tuple_trace,
    mixed_c4_observable, Mode,
};
use crate::exact_otoc::otoc_4k;
use crate::qlinalg::{DenseOperator, PauliString, StateVector};
use crate::rng::Seed;
use crate::shadows::{build_shadow, StatePrep};

/// Tomography sample-complexity exponents for comparison with the shadow
/// bound, as `(name, power of d, power of 1/ε)`.
pub const TOMOGRAPHY_SCALINGS: [(&str, u32, u32); 3] = [
    ("tomography_trace_distance", 4, 2),
    ("tomography_infidelity", 3, 1),
    ("tomography_single_copy", 5, 2),
];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceBoundInputs {
    pub d: usize,
    pub k: usize,
    pub d2: f64,
    pub d4: f64,
    pub d8: f64,
    pub epsilon: f64,
    pub delta: f64,
}

impl VarianceBoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(out_of_range("d", self.d, ">= 2"));
        }
        if self.k < 1 {
            return Err(out_of_range("K", self.k, ">= 1"));
        }
        check_eps_delta(self.epsilon, self.delta)
    }
}

fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(out_of_range("epsilon", epsilon, "(0, 1)"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(out_of_range("delta", delta, "(0, 1)"));
    }
    Ok(())
}

/// `8d²/K + 3d⁵/K²`.
pub fn variance_bound_c4(d: usize, k: usize) -> Result<f64> {
    if k < 2 {
        return Err(out_of_range("K", k, ">= 2"));
    }
    let (d, k) = (d as f64, k as f64);
    Ok(8.0 * d * d / k + 3.0 * d.powi(5) / (k * k))
}

fn prop1_rhs(d: f64, epsilon: f64, delta: f64) -> f64 {
    let a = 8.0 * d * d / (epsilon * epsilon * delta);
    let b = 3f64.sqrt() * d.powf(2.5) / (epsilon * delta.sqrt());
    2.0 * a.max(b)
}

/// Smallest `K ≥ 2·max{8d²/(ε²δ), √3·d^2.5/(ε√δ)}`.
pub fn sample_size_c4(d: usize, epsilon: f64, delta: f64) -> Result<usize> {
    check_eps_delta(epsilon, delta)?;
    if d < 2 {
        return Err(out_of_range("d", d, ">= 2"));
    }
    let x = prop1_rhs(d as f64, epsilon, delta);
    // absorb rounding noise such as 10240.000000000002
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x { r } else { x.ceil() };
    Ok(k as usize)
}

/// Whether `k` satisfies the sample-size inequality (same rounding slack as
/// [`sample_size_c4`]).
pub fn satisfies_sample_size_c4(d: usize, epsilon: f64, delta: f64, k: usize) -> bool {
    let x = prop1_rhs(d as f64, epsilon, delta);
    k as f64 >= x * (1.0 - 1e-9)
}

/// Full bound `64d⁵D₈/K + 16(4dD₄ + d²D₄² + 8D₂² + 2)/K²
/// + 32[d¹⁰(1 + D₂²) + 3d⁸]/K³ + 4(d¹⁴ + 5d⁶)/K⁴` on `Var(L̂₈)`.
pub fn variance_bound_l8(d: usize, k: usize, d2: f64, d4: f64, d8: f64) -> Result<f64> {
    if k < 4 {
        return Err(out_of_range("K", k, ">= 4"));
    }
    let (d, k) = (d as f64, k as f64);
    Ok(64.0 * d.powi(5) * d8 / k
        + 16.0 * (4.0 * d * d4 + d * d * d4 * d4 + 8.0 * d2 * d2 + 2.0) / k.powi(2)
        + 32.0 * (d.powi(10) * (1.0 + d2 * d2) + 3.0 * d.powi(8)) / k.powi(3)
        + 4.0 * (d.powi(14) + 5.0 * d.powi(6)) / k.powi(4))
}

/// Early-time bound `512d²/K + 352/K² + 32(2d¹⁰ + 3d⁸)/K³ + 4(d¹⁴ + 5d⁶)/K⁴`.
pub fn variance_bound_l8_early(d: usize, k: usize) -> Result<f64> {
    if k < 4 {
        return Err(out_of_range("K", k, ">= 4"));
    }
    let (d, k) = (d as f64, k as f64);
    Ok(512.0 * d * d / k
        + 352.0 / k.powi(2)
        + 32.0 * (2.0 * d.powi(10) + 3.0 * d.powi(8)) / k.powi(3)
        + 4.0 * (d.powi(14) + 5.0 * d.powi(6)) / k.powi(4))
}

/// `D_{2p} = Tr{(Wρ_V)^p}` for `p = 1, 2, 4`.
pub fn mixed_moments(spec: &HamiltonianSpectrum, t: f64, w: &PauliString) -> Result<(f64, f64, f64)> {
    use crate::exact_otoc::mixed_moment;
    Ok((
        mixed_moment(spec, t, w, 1)?,
        mixed_moment(spec, t, w, 2)?,
        mixed_moment(spec, t, w, 4)?,
    ))
}

/// Unbiased sample variance (divisor `n − 1`), two-pass.
pub fn empirical_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(out_of_range("values.len()", values.len(), ">= 2"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Same as [`empirical_variance`] in a single Welford pass.
pub fn welford_variance(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(out_of_range("values.len()", values.len(), ">= 2"));
    }
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    Ok(m2 / (values.len() - 1) as f64)
}

/// Sample mean and its standard error.
pub fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    let var = empirical_variance(values)?;
    let n = values.len() as f64;
    Ok((values.iter().sum::<f64>() / n, (var / n).sqrt()))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(OtocError::InvalidArgument("need at least two matched points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(OtocError::InvalidArgument("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub bound_name: String,
    pub params: BTreeMap<String, f64>,
    pub empirical: f64,
    /// `None` for quantities the theory leaves unbounded.
    pub bound: Option<f64>,
    pub pass: bool,
}

impl AuditReport {
    fn new(name: &str, params: &[(&str, f64)], empirical: f64, bound: Option<f64>) -> Self {
        let pass = match bound {
            Some(b) => empirical.is_finite() && empirical <= b,
            None => empirical.is_finite(),
        };
        Self {
            bound_name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            empirical,
            bound,
            pass,
        }
    }
}

fn mixture_from_density(rho: &DenseOperator) -> Result<StatePrep> {
    let d = rho.dim();
    if !d.is_power_of_two() || d < 2 {
        return Err(OtocError::InvalidState(format!("dimension {d} is not a qubit register")));
    }
    if !rho.is_hermitian(1e-10) || (rho.trace().re - 1.0).abs() > 1e-10 || rho.trace().im.abs() > 1e-10 {
        return Err(OtocError::InvalidState("density matrix must be Hermitian with unit trace".into()));
    }
    let eig = rho.to_nalgebra().symmetric_eigen();
    let mut members = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-10 {
            return Err(OtocError::InvalidState(format!("negative eigenvalue {lam:.3e}")));
        }
        if lam > 1e-14 {
            let col: Vec<_> = eig.eigenvectors.column(i).iter().copied().collect();
            members.push((lam, StateVector::normalized(col)?));
        }
    }
    let total: f64 = members.iter().map(|m| m.0).sum();
    for m in &mut members {
        m.0 /= total;
    }
    StatePrep::explicit_mixture(members)
}

/// Lemma-1 audit: empirical variance of `Tr{T_(1,2)W^{⊗2}ρ̂⊗ρ̂′}` over
/// independent snapshot pairs of `rho`, against `d³`.
pub fn lemma1_audit(rho: &DenseOperator, w: &PauliString, samples: usize, seed: Seed) -> Result<AuditReport> {
    let d = rho.dim();
    if d > 8 {
        return Err(out_of_range("qubits", d.trailing_zeros(), "<= 3"));
    }
    if w.num_qubits() as u32 != d.trailing_zeros() {
        return Err(OtocError::DimensionMismatch("W does not match the state".into()));
    }
    let prep = mixture_from_density(rho)?;
    let shadow = build_shadow(&prep, 2 * samples, seed)?;
    let obs = mixed_c4_observable(w)?;
    let snaps = shadow.snapshots();
    let vals = (0..samples)
        .into_par_iter()
        .map(|i| factorized_tuple_trace(&[&snaps[2 * i], &snaps[2 * i + 1]], &obs).map(|z| z.re))
        .collect::<Result<Vec<_>>>()?;
    let var = empirical_variance(&vals)?;
    let df = d as f64;
    Ok(AuditReport::new(
        "lemma1",
        &[("d", df), ("samples", samples as f64), ("identity_w", w.is_identity() as u8 as f64)],
        var,
        Some(df.powi(3)),
    ))
}

/// Single-snapshot variance of `Tr{Oρ̂}` for a Pauli `O`, against `d·Tr{O²}`.
pub fn fact1_audit(state: &StateVector, o: &PauliString, samples: usize, seed: Seed) -> Result<AuditReport> {
    if o.num_qubits() != state.num_qubits() {
        return Err(OtocError::DimensionMismatch("observable does not match the state".into()));
    }
    let shadow = build_shadow(&StatePrep::explicit(state.clone()), samples, seed)?;
    let single = crate::estimators::ObservableSpec::new(
        vec![o.clone()],
        vec![crate::qlinalg::Permutation::identity(1); o.num_qubits()],
        crate::estimators::Side::Left,
        1.0,
    )?;
    let vals = shadow
        .snapshots()
        .par_iter()
        .map(|s| factorized_tuple_trace(&[s], &single).map(|z| z.re))
        .collect::<Result<Vec<_>>>()?;
    let d = state.dim() as f64;
    Ok(AuditReport::new(
        "fact1",
        &[("d", d), ("samples", samples as f64)],
        empirical_variance(&vals)?,
        Some(d * d),
    ))
}

fn repeated_mixed<F>(
    spec: &HamiltonianSpectrum,
    t: f64,
    k: usize,
    reps: usize,
    seed: Seed,
    f: F,
) -> Result<Vec<f64>>
where
    F: Fn(&crate::shadows::Shadow) -> Result<f64> + Sync,
{
    let prep = StatePrep::mixed_protocol(spec, t)?;
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let shadow = build_shadow(&prep, k, seed.derive(&[r as u64]))?;
            f(&shadow)
        })
        .collect()
}

/// Empirical `Var(Ĉ₄)` over `reps` independent shadows of size `k`.
pub fn c4_variance_audit(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    k: usize,
    reps: usize,
    seed: Seed,
) -> Result<AuditReport> {
    let vals = repeated_mixed(spec, t, k, reps, seed, |s| {
        Ok(estimate_c4_mixed(s, w, &Mode::Exhaustive)?.value.re)
    })?;
    let d = spec.dim();
    Ok(AuditReport::new(
        "c4_variance",
        &[("d", d as f64), ("K", k as f64), ("t", t), ("reps", reps as f64)],
        empirical_variance(&vals)?,
        Some(variance_bound_c4(d, k)?),
    ))
}

/// Empirical `Var(L̂₈)` against the full bound with oracle `D`-moments, or
/// the early-time bound.
pub fn l8_variance_audit(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    k: usize,
    reps: usize,
    early_time: bool,
    seed: Seed,
) -> Result<AuditReport> {
    let vals = repeated_mixed(spec, t, k, reps, seed, |s| {
        Ok(estimate_l8_mixed(s, w, &Mode::Exhaustive)?.value.re)
    })?;
    let d = spec.dim();
    let (name, bound) = if early_time {
        ("l8_variance_early", variance_bound_l8_early(d, k)?)
    } else {
        let (d2, d4, d8) = mixed_moments(spec, t, w)?;
        ("l8_variance", variance_bound_l8(d, k, d2, d4, d8)?)
    };
    Ok(AuditReport::new(
        name,
        &[("d", d as f64), ("K", k as f64), ("t", t), ("reps", reps as f64)],
        empirical_variance(&vals)?,
        Some(bound),
    ))
}

/// Empirical `Var(Ĉ₈)`; reported without a bound.
pub fn c8_variance_report(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    k: usize,
    reps: usize,
    seed: Seed,
) -> Result<AuditReport> {
    let vals = repeated_mixed(spec, t, k, reps, seed, |s| {
        Ok(estimate_c8_mixed(s, w, &Mode::Exhaustive)?.value.re)
    })?;
    Ok(AuditReport::new(
        "c8_variance",
        &[("d", spec.dim() as f64), ("K", k as f64), ("t", t), ("reps", reps as f64)],
        empirical_variance(&vals)?,
        None,
    ))
}

/// Chebyshev check: fraction of `trials` shadows of the prescribed size with
/// `|Ĉ₄ − C₄| > ε`, against `δ`.
pub fn sample_size_audit(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    epsilon: f64,
    delta: f64,
    trials: usize,
    seed: Seed,
) -> Result<AuditReport> {
    let d = spec.dim();
    let k = sample_size_c4(d, epsilon, delta)?;
    let exact = otoc_4k(spec, t, w, v, 1)?.re;
    let vals = repeated_mixed(spec, t, k, trials, seed, |s| {
        Ok(estimate_c4_mixed(s, w, &Mode::Exhaustive)?.value.re)
    })?;
    let failures = vals.iter().filter(|x| (*x - exact).abs() > epsilon).count();
    let params = [
        ("d", d as f64),
        ("epsilon", epsilon),
        ("delta", delta),
        ("K", k as f64),
        ("t", t),
        ("trials", trials as f64),
    ];
    let comparisons: Vec<(String, f64)> = TOMOGRAPHY_SCALINGS
        .iter()
        .map(|(n, pd, pe)| (n.to_string(), (d as f64).powi(*pd as i32) / epsilon.powi(*pe as i32)))
        .collect();
    let mut report = AuditReport::new(
        "prop1_failure_rate",
        &params,
        failures as f64 / trials as f64,
        Some(delta),
    );
    report.params.extend(comparisons);
    Ok(report)
}
