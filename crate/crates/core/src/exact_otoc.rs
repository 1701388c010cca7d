//! Brute-force dense evaluation of every correlator the estimators target.
//!
//! Nothing here shares code with the shadow estimators; these values are the
//! reference the estimators are tested against.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolution_operator, heisenberg_operator, prepare_mixed_protocol_state, HamiltonianSpectrum,
};
use crate::error::{out_of_range, OtocError, Result};
use crate::qlinalg::{
    all_permutations, weingarten_matrix, DenseOperator, Pauli, PauliString, Permutation,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocPoint {
    pub t: f64,
    pub k: usize,
    pub value: Complex64,
    pub n_qubits: usize,
    pub w_label: String,
    pub v_label: String,
}

fn check_pair(spec: &HamiltonianSpectrum, w: &PauliString, v: &PauliString) -> Result<()> {
    let n = spec.num_qubits();
    if w.num_qubits() != n || v.num_qubits() != n {
        return Err(OtocError::DimensionMismatch(format!(
            "W and V must act on {n} qubits (got {} and {})",
            w.num_qubits(),
            v.num_qubits()
        )));
    }
    let ws = w.support();
    if v.support().iter().any(|q| ws.contains(q)) {
        return Err(OtocError::InvalidArgument(format!(
            "W = {w} and V = {v} overlap; the correlator assumes disjoint supports"
        )));
    }
    Ok(())
}

/// `W(t)† V† W(t) V`
fn otoc_kernel(spec: &HamiltonianSpectrum, t: f64, w: &PauliString, v: &PauliString) -> Result<DenseOperator> {
    check_pair(spec, w, v)?;
    let u = evolution_operator(spec, t);
    let wt = heisenberg_operator(w, &u)?;
    let v_dense = v.matrix();
    DenseOperator::product(&[&wt.adjoint(), &v_dense.adjoint(), &wt, &v_dense])
}

/// `C_{4k}(t) = Tr{(W(t)† V† W(t) V)^k} / d`.
pub fn otoc_4k(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    k: usize,
) -> Result<Complex64> {
    if k == 0 {
        return Err(out_of_range("k", k, ">= 1"));
    }
    let a = otoc_kernel(spec, t, w, v)?;
    Ok(a.pow(k).trace() / spec.dim() as f64)
}

/// `[C_4, C_8, …, C_{4·k_max}]` from one kernel.
pub fn otoc_series(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    k_max: usize,
) -> Result<Vec<Complex64>> {
    let a = otoc_kernel(spec, t, w, v)?;
    let d = spec.dim() as f64;
    let mut power = a.clone();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        if k > 1 {
            power = power.matmul(&a)?;
        }
        out.push(power.trace() / d);
    }
    Ok(out)
}

fn check_state(rho: &DenseOperator, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(OtocError::DimensionMismatch(format!(
            "state of dimension {} for a {dim}-dimensional system",
            rho.dim()
        )));
    }
    if (rho.trace() - Complex64::new(1.0, 0.0)).norm() > 1e-9 {
        return Err(OtocError::InvalidState(format!("trace {}", rho.trace())));
    }
    let ev = rho.hermitian_eigenvalues()?;
    if ev[0] < -1e-9 {
        return Err(OtocError::InvalidState(format!(
            "negative eigenvalue {}",
            ev[0]
        )));
    }
    Ok(())
}

/// `Tr{ρ (W(t)† V† W(t) V)^k}`.
pub fn general_otoc(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    k: usize,
    rho: &DenseOperator,
) -> Result<Complex64> {
    if k == 0 {
        return Err(out_of_range("k", k, ">= 1"));
    }
    check_state(rho, spec.dim())?;
    let a = otoc_kernel(spec, t, w, v)?;
    rho.trace_product(&a.pow(k))
}

/// `[Tr{|[W(t),V]|^{2n}}]^{1/2n}` from the spectrum of `[W(t),V]†[W(t),V]`.
pub fn commutator_schatten_norm(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    n: usize,
) -> Result<f64> {
    if n == 0 {
        return Err(out_of_range("n", n, ">= 1"));
    }
    check_pair(spec, w, v)?;
    let u = evolution_operator(spec, t);
    let wt = heisenberg_operator(w, &u)?;
    let c = wt.commutator(&v.matrix())?;
    let gram = c.adjoint().matmul(&c)?;
    // symmetrize away rounding before the Hermitian solver
    let gram = gram.add(&gram.adjoint())?.scale_real(0.5);
    let sum: f64 = gram
        .hermitian_eigenvalues()?
        .into_iter()
        .map(|l| l.max(0.0).powi(n as i32))
        .sum();
    Ok(sum.powf(1.0 / (2 * n) as f64))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// `b_k(n)` with `Tr{|[W(t),V]|^{2n}} = d Σ_k b_k(n) Re C_{4k}(t)` and
/// `C_0 = 1`: `b_0 = C(2n, n)`, `b_k = 2(−1)^k C(2n, n−k)`.
///
/// Follows from `|[W,V]|² = 2I − B − B⁻¹` with `B = (W(t)V)²` for Hermitian
/// involutions `W`, `V`.
pub fn expansion_coefficients(n: usize) -> Result<Vec<f64>> {
    if !(1..=6).contains(&n) {
        return Err(out_of_range("n", n, "1..=6"));
    }
    Ok((0..=n)
        .map(|k| {
            let b = binomial(2 * n, n - k);
            if k == 0 {
                b
            } else if k % 2 == 0 {
                2.0 * b
            } else {
                -2.0 * b
            }
        })
        .collect())
}

/// Schatten norm rebuilt from `C_4 … C_{4n}`.
pub fn schatten_norm_from_otocs(d: usize, otocs: &[Complex64]) -> Result<f64> {
    let n = otocs.len();
    let b = expansion_coefficients(n)?;
    let mut sum = b[0];
    for k in 1..=n {
        sum += b[k] * otocs[k - 1].re;
    }
    Ok((d as f64 * sum).max(0.0).powf(1.0 / (2 * n) as f64))
}

/// Both routes to the Schatten norm; errors when they disagree beyond
/// `tol` (relative to the larger value plus one).
pub fn checked_schatten_norm(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
    n: usize,
    tol: f64,
) -> Result<f64> {
    let direct = commutator_schatten_norm(spec, t, w, v, n)?;
    let series = otoc_series(spec, t, w, v, n)?;
    let expanded = schatten_norm_from_otocs(spec.dim(), &series)?;
    // compare the 2n-th powers: the root amplifies rounding near zero
    let p = (2 * n) as i32;
    let (a, b) = (direct.powi(p), expanded.powi(p));
    if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
        return Err(OtocError::Consistency(format!(
            "Schatten {p}-norm at t = {t}: eigenvalue route {direct}, expansion route {expanded}"
        )));
    }
    Ok(direct)
}

fn mixed_protocol_w(n: usize) -> Result<PauliString> {
    PauliString::single(n, 1, Pauli::Z)
}

/// `Tr{(W ρ_V)^p}`.
pub fn mixed_moment(spec: &HamiltonianSpectrum, t: f64, w: &PauliString, p: usize) -> Result<f64> {
    let n = spec.num_qubits();
    if w.num_qubits() != n {
        return Err(OtocError::DimensionMismatch("W on the wrong qubit count".into()));
    }
    let rho = prepare_mixed_protocol_state(n, spec, t)?;
    let wr = w.left_mul(&rho)?;
    Ok(wr.pow(p).trace().re)
}

/// `L_8(t) = d³ Tr{(ρ_V W)^4}` with `W = Z_1`.
pub fn leading_term_l8(spec: &HamiltonianSpectrum, t: f64) -> Result<f64> {
    leading_term_l8_with(spec, t, &mixed_protocol_w(spec.num_qubits())?)
}

/// `L_8(t) = d³ Tr{(ρ_V W)^4}` for a given `W`.
pub fn leading_term_l8_with(spec: &HamiltonianSpectrum, t: f64, w: &PauliString) -> Result<f64> {
    let d = spec.dim() as f64;
    Ok(d.powi(3) * mixed_moment(spec, t, w, 4)?)
}

/// `L_8 = Tr{(W(t)(I + V))^4} / d`, which reduces to [`leading_term_l8_with`]
/// for `V = Z_N`.
pub fn leading_term_l8_pair(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
) -> Result<f64> {
    check_pair(spec, w, v)?;
    let wt = heisenberg_operator(w, &evolution_operator(spec, t))?;
    let a = wt.add(&v.right_mul(&wt)?)?;
    Ok(a.pow(4).trace().re / spec.dim() as f64)
}

/// Every exact-curve column at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub c4: f64,
    pub c8: f64,
    pub c12: f64,
    pub l8: f64,
    pub schatten_2: f64,
    pub schatten_4: f64,
}

/// `C_4, C_8, C_12`, `L_8` (as in [`leading_term_l8_pair`]) and the Schatten
/// 2- and 4-norms of `[W(t), V]` from a single `W(t)`, using
/// `Tr{|C|^{2n}} = Tr{(C†C)^n}`.
pub fn exact_curve_point(
    spec: &HamiltonianSpectrum,
    t: f64,
    w: &PauliString,
    v: &PauliString,
) -> Result<CurvePoint> {
    check_pair(spec, w, v)?;
    let d = spec.dim() as f64;
    let wt = heisenberg_operator(w, &evolution_operator(spec, t))?;
    let wt_v = v.right_mul(&wt)?;
    // W(t)† V† W(t) V
    let kernel = v.adjoint().right_mul(&wt.adjoint())?.matmul(&wt_v)?;
    let k2 = kernel.matmul(&kernel)?;
    let b = wt.add(&wt_v)?;
    let b2 = b.matmul(&b)?;
    let comm = wt_v.sub(&v.left_mul(&wt)?)?;
    let gram = comm.adjoint().matmul(&comm)?;
    Ok(CurvePoint {
        c4: kernel.trace().re / d,
        c8: k2.trace().re / d,
        c12: k2.trace_product(&kernel)?.re / d,
        l8: b2.trace_product(&b2)?.re / d,
        schatten_2: comm.frobenius_norm(),
        schatten_4: gram.frobenius_norm().sqrt(),
    })
}

/// Haar average of `C_{4k}` for `k ∈ {1, 2}` from the Weingarten sum over
/// pairs `(π, σ)` with no odd cycles in `π` nor in `σ₀∘σ`, `σ₀` the full
/// `2k`-cycle.
pub fn late_time_haar_average(k: usize, d: usize) -> Result<f64> {
    if !(1..=2).contains(&k) {
        return Err(out_of_range("k", k, "1..=2"));
    }
    if d < 2 * k {
        return Err(out_of_range("d", d, ">= 2k"));
    }
    let copies = 2 * k;
    let wg = weingarten_matrix(copies, d)?;
    let sigma0 = Permutation::forward_cycle(copies);
    let perms = all_permutations(copies);
    let df = d as f64;
    let mut total = 0.0;
    for (i, pi) in perms.iter().enumerate() {
        if pi.has_odd_cycle() {
            continue;
        }
        for (j, sigma) in perms.iter().enumerate() {
            let sp = sigma0.compose(sigma)?;
            if sp.has_odd_cycle() {
                continue;
            }
            total += wg.get(i, j) * df.powi((pi.num_cycles() + sp.num_cycles()) as i32);
        }
    }
    Ok(total / df)
}

fn commutator_pair(n: usize) -> Result<(PauliString, PauliString)> {
    if n < 2 {
        return Err(out_of_range("n", n, ">= 2"));
    }
    Ok((PauliString::single(n, 1, Pauli::Z)?, PauliString::single(n, n, Pauli::X)?))
}

/// `⟨W(t) W V(t) V W(t) V V(t) W⟩` at infinite temperature, `W = Z_1`,
/// `V = X_N`.
pub fn commutator_type_correlator(spec: &HamiltonianSpectrum, t: f64) -> Result<Complex64> {
    let (w, v) = commutator_pair(spec.num_qubits())?;
    let u = evolution_operator(spec, t);
    let wt = heisenberg_operator(&w, &u)?;
    let vt = heisenberg_operator(&v, &u)?;
    let (wm, vm) = (w.matrix(), v.matrix());
    let prod = DenseOperator::product(&[&wt, &wm, &vt, &vm, &wt, &vm, &vt, &wm])?;
    Ok(prod.trace() / spec.dim() as f64)
}

/// The same correlator written as
/// `Tr{U W U† V U V U† W U V U† V U W U† W} / d` with `U = U_H(t)`.
pub fn commutator_type_correlator_cyclic(spec: &HamiltonianSpectrum, t: f64) -> Result<Complex64> {
    let (w, v) = commutator_pair(spec.num_qubits())?;
    let u = evolution_operator(spec, t).matrix;
    let ud = u.adjoint();
    let (wm, vm) = (w.matrix(), v.matrix());
    let prod = DenseOperator::product(&[
        &u, &wm, &ud, &vm, &u, &vm, &ud, &wm, &u, &vm, &ud, &vm, &u, &wm, &ud, &wm,
    ])?;
    Ok(prod.trace() / spec.dim() as f64)
}

/// Convenience label for `W = Z_1`, `V = Z_N`.
pub fn default_pair(n: usize) -> Result<(PauliString, PauliString)> {
    if n < 2 {
        return Err(out_of_range("n", n, ">= 2"));
    }
    Ok((PauliString::single(n, 1, Pauli::Z)?, PauliString::single(n, n, Pauli::Z)?))
}
