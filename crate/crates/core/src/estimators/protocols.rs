use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::observable::{ObservableSpec, Side};
use super::ustat::{two_sample_u_statistic, u_statistic, LabelMatrix, Mode, UStat};
use crate::error::{OtocError, Result};
use crate::qlinalg::{Pauli, PauliString, Permutation};
use crate::shadows::Shadow;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub protocol: String,
    pub k: usize,
    pub t: f64,
    pub value: Complex64,
    pub num_terms: u64,
    pub mode: Mode,
    pub seed: u64,
}

/// Flat JSON record of an [`EstimatorResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub protocol: String,
    pub k: usize,
    pub t: f64,
    pub value_re: f64,
    pub value_im: f64,
    pub num_terms: u64,
    pub mode: String,
    pub seed: u64,
}

impl EstimatorResult {
    pub fn subsampled(&self) -> bool {
        matches!(self.mode, Mode::Subsampled { .. })
    }

    pub fn record(&self) -> EstimatorRecord {
        let mode = match self.mode {
            Mode::Exhaustive => "exhaustive".to_string(),
            Mode::Subsampled { samples, seed } => format!("subsampled:{samples}:{}", seed.0),
        };
        EstimatorRecord {
            protocol: self.protocol.clone(),
            k: self.k,
            t: self.t,
            value_re: self.value.re,
            value_im: self.value.im,
            num_terms: self.num_terms,
            mode,
            seed: self.seed,
        }
    }

    fn from_ustat(protocol: &str, k: usize, shadow: &Shadow, mode: &Mode, u: UStat) -> Self {
        Self {
            protocol: protocol.to_string(),
            k,
            t: shadow.meta.t,
            value: u.value,
            num_terms: u.num_terms,
            mode: *mode,
            seed: shadow.meta.seed,
        }
    }
}

fn check_protocol(shadow: &Shadow, expected: &str) -> Result<()> {
    let p = shadow.meta.protocol.as_str();
    if p == expected || p.starts_with("explicit") {
        Ok(())
    } else {
        Err(OtocError::ShadowMismatch(format!(
            "expected a {expected} shadow, got {p}"
        )))
    }
}

fn check_qubits(shadow: &Shadow, expected: usize) -> Result<()> {
    if shadow.num_qubits() != expected {
        return Err(OtocError::ShadowMismatch(format!(
            "shadow has {} qubits, estimator expects {expected}",
            shadow.num_qubits()
        )));
    }
    Ok(())
}

fn check_k(shadow: &Shadow, needed: usize) -> Result<()> {
    if shadow.len() < needed {
        return Err(OtocError::NotEnoughSnapshots {
            needed,
            got: shadow.len(),
        });
    }
    Ok(())
}

/// `O_{4k}` on `2k` copies of the doubled register: copy `j` carries
/// `W† ⊗ V*` (even `j`) or `W ⊗ Vᵀ` (odd `j`); system qubits are fixed and
/// every ancilla qubit runs the cycle `j → j−1`.
pub fn multibell_observable(w: &PauliString, v: &PauliString, k: usize) -> Result<ObservableSpec> {
    let n = w.num_qubits();
    if v.num_qubits() != n {
        return Err(OtocError::DimensionMismatch("W and V differ in qubit count".into()));
    }
    if k == 0 {
        return Err(OtocError::InvalidArgument("k must be at least 1".into()));
    }
    let copies = 2 * k;
    let even = w.adjoint().tensor(&v.conj());
    let odd = w.tensor(&v.transpose());
    let factors = (0..copies)
        .map(|j| if j % 2 == 0 { even.clone() } else { odd.clone() })
        .collect();
    let mut wiring = vec![Permutation::identity(copies); n];
    wiring.extend(std::iter::repeat_n(Permutation::backward_cycle(copies), n));
    let d = (1u64 << n) as f64;
    ObservableSpec::new(factors, wiring, Side::Left, d.powi(2 * k as i32 - 1))
}

/// Unbiased `Ĉ_{4k}` from a shadow of the channel-dual state on `2N` qubits.
pub fn estimate_c4k_multibell(
    shadow: &Shadow,
    w: &PauliString,
    v: &PauliString,
    k: usize,
    mode: &Mode,
) -> Result<EstimatorResult> {
    check_protocol(shadow, "multi_bell")?;
    check_qubits(shadow, 2 * w.num_qubits())?;
    check_k(shadow, 2 * k)?;
    let obs = multibell_observable(w, v, k)?;
    let u = u_statistic(&LabelMatrix::from_shadow(shadow), &obs, mode)?;
    Ok(EstimatorResult::from_ustat("multi_bell", k, shadow, mode, u))
}

fn check_mixed_w(w: &PauliString, shadow: &Shadow) -> Result<()> {
    check_protocol(shadow, "mixed")?;
    check_qubits(shadow, w.num_qubits())?;
    if !w.is_hermitian() || w.is_identity() {
        return Err(OtocError::InvalidArgument(format!(
            "the mixed-state estimators need a Hermitian, non-identity Pauli W, got {w}"
        )));
    }
    Ok(())
}

/// `d·W^{⊗2}T_(1,2)`; the transposition is its own conjugacy class.
pub fn mixed_c4_observable(w: &PauliString) -> Result<ObservableSpec> {
    let d = (1u64 << w.num_qubits()) as f64;
    ObservableSpec::uniform(vec![w.clone(); 2], Permutation::forward_cycle(2), Side::Left, d)?
        .with_orderings(vec![Permutation::identity(2)])
}

/// The six orderings of a 4-subset that keep its first element in copy 1;
/// together with `T_(1,2,3,4)` they realize each 4-cycle once.
pub fn four_cycle_orderings() -> Vec<Permutation> {
    [[1, 2, 3, 4], [1, 2, 4, 3], [1, 3, 2, 4], [1, 3, 4, 2], [1, 4, 2, 3], [1, 4, 3, 2]]
        .iter()
        .map(|p| Permutation::from_one_line(p).expect("valid one-line permutation"))
        .collect()
}

/// `d³·W^{⊗4}T_(1,2,3,4)`.
pub fn mixed_l8_observable(w: &PauliString) -> Result<ObservableSpec> {
    let d = (1u64 << w.num_qubits()) as f64;
    ObservableSpec::uniform(vec![w.clone(); 4], Permutation::forward_cycle(4), Side::Left, d.powi(3))?
        .with_orderings(four_cycle_orderings())
}

/// `Ĉ_4 = d·mean Tr{ρ̂⊗ρ̂′ W^{⊗2}T_(1,2)} − 1` from a shadow of `ρ_V`.
pub fn estimate_c4_mixed(shadow: &Shadow, w: &PauliString, mode: &Mode) -> Result<EstimatorResult> {
    check_mixed_w(w, shadow)?;
    check_k(shadow, 2)?;
    let u = u_statistic(&LabelMatrix::from_shadow(shadow), &mixed_c4_observable(w)?, mode)?;
    let mut r = EstimatorResult::from_ustat("mixed_c4", 1, shadow, mode, u);
    r.value -= 1.0;
    Ok(r)
}

/// `L̂_8 = d³·mean Tr{ρ̂^{⊗4} W^{⊗4}T_(1,2,3,4)}`.
pub fn estimate_l8_mixed(shadow: &Shadow, w: &PauliString, mode: &Mode) -> Result<EstimatorResult> {
    check_mixed_w(w, shadow)?;
    check_k(shadow, 4)?;
    let u = u_statistic(&LabelMatrix::from_shadow(shadow), &mixed_l8_observable(w)?, mode)?;
    Ok(EstimatorResult::from_ustat("mixed_l8", 2, shadow, mode, u))
}

/// `Ĉ_8 = L̂_8 − 4Ĉ_4 − 3` on one shadow and one mode.
pub fn estimate_c8_mixed(shadow: &Shadow, w: &PauliString, mode: &Mode) -> Result<EstimatorResult> {
    let l8 = estimate_l8_mixed(shadow, w, mode)?;
    let c4 = estimate_c4_mixed(shadow, w, mode)?;
    Ok(EstimatorResult {
        protocol: "mixed_c8".into(),
        k: 2,
        t: shadow.meta.t,
        value: l8.value - c4.value * 4.0 - 3.0,
        num_terms: l8.num_terms + c4.num_terms,
        mode: *mode,
        seed: shadow.meta.seed,
    })
}

fn b_operator(n: usize) -> Result<PauliString> {
    // Z_1 on the system, Xᵀ = X on the ancilla
    Ok(PauliString::single(n, 1, Pauli::Z)?.tensor(&PauliString::new(vec![Pauli::X], 0)))
}

/// `B^{⊗2k}` with every system qubit on the cycle `j → j+1` and the ancilla
/// fixed.
pub fn single_bell_observable(n: usize, k: usize) -> Result<ObservableSpec> {
    if n < 2 {
        return Err(OtocError::InvalidArgument("single-Bell protocol needs N >= 2".into()));
    }
    if k == 0 {
        return Err(OtocError::InvalidArgument("k must be at least 1".into()));
    }
    let copies = 2 * k;
    let mut wiring = vec![Permutation::forward_cycle(copies); n];
    wiring.push(Permutation::identity(copies));
    let d = (1u64 << n) as f64;
    ObservableSpec::new(vec![b_operator(n)?; copies], wiring, Side::Right, d.powi(2 * k as i32 - 1))
}

/// Unbiased `Ĉ_{4k}` for `W = Z_1`, `V = X_N` from a shadow of the
/// single-Bell state (Bell pair on system qubit `N`).
pub fn estimate_c4k_single_bell(shadow: &Shadow, k: usize, mode: &Mode) -> Result<EstimatorResult> {
    check_protocol(shadow, "single_bell")?;
    let n = shadow.num_qubits().saturating_sub(1);
    check_k(shadow, 2 * k)?;
    let obs = single_bell_observable(n, k)?;
    let u = u_statistic(&LabelMatrix::from_shadow(shadow), &obs, mode)?;
    Ok(EstimatorResult::from_ustat("single_bell", k, shadow, mode, u))
}

/// `O_ct` with factors `X_N Zᵀ_a, Z_1 Xᵀ_a, X_N Xᵀ_a, Z_1 Zᵀ_a` and every
/// system qubit on the forward 4-cycle.
pub fn commutator_observable(n: usize) -> Result<ObservableSpec> {
    if n < 2 {
        return Err(OtocError::InvalidArgument("commutator protocol needs N >= 2".into()));
    }
    let xn = PauliString::single(n, n, Pauli::X)?;
    let z1 = PauliString::single(n, 1, Pauli::Z)?;
    let anc = |p: Pauli| PauliString::new(vec![p], 0);
    let factors = vec![
        xn.tensor(&anc(Pauli::Z)),
        z1.tensor(&anc(Pauli::X)),
        xn.tensor(&anc(Pauli::X)),
        z1.tensor(&anc(Pauli::Z)),
    ];
    let mut wiring = vec![Permutation::forward_cycle(4); n];
    wiring.push(Permutation::identity(4));
    let d = (1u64 << n) as f64;
    ObservableSpec::new(factors, wiring, Side::Right, d.powi(3))
}

/// Unbiased `Ĉ_ct` from a shadow with the Bell pair on qubit 1
/// (`shadow_a`, copies 1 and 4) and one with it on qubit `N` (`shadow_b`,
/// copies 2 and 3).
pub fn estimate_commutator_type(shadow_a: &Shadow, shadow_b: &Shadow, mode: &Mode) -> Result<EstimatorResult> {
    check_protocol(shadow_a, "single_bell")?;
    check_protocol(shadow_b, "single_bell")?;
    if shadow_a.num_qubits() != shadow_b.num_qubits()
        || shadow_a.meta.n != shadow_b.meta.n
        || shadow_a.meta.t.to_bits() != shadow_b.meta.t.to_bits()
    {
        return Err(OtocError::ShadowMismatch(
            "commutator shadows must share N and t".into(),
        ));
    }
    let n = shadow_a.num_qubits().saturating_sub(1);
    let obs = commutator_observable(n)?;
    let u = two_sample_u_statistic(
        &LabelMatrix::from_shadow(shadow_a),
        &LabelMatrix::from_shadow(shadow_b),
        &obs,
        mode,
    )?;
    Ok(EstimatorResult::from_ustat("commutator", 2, shadow_a, mode, u))
}
