use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::clifford::{clifford_table, outcome_label, snapshot_factors, NUM_CLIFFORDS};
use crate::dynamics::{
    bell_dual_vector, ensemble_density, evolution_operator, mixed_protocol_ensemble,
    single_bell_ensemble, HamiltonianSpectrum,
};
use crate::error::{out_of_range, OtocError, Result};
use crate::qlinalg::{DenseOperator, Mat2, StateVector};
use crate::rng::{RandomStream, Seed};

pub const MAX_SAMPLED_QUBITS: usize = 14;
pub const MAX_DENSE_SNAPSHOT_QUBITS: usize = 6;

/// One randomized-measurement record: per qubit, the Clifford applied and
/// the bit observed. The classical snapshot is `⊗_q (3 u_q†|b_q⟩⟨b_q|u_q − I)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Snapshot {
    cliffords: Vec<u8>,
    outcomes: Vec<u8>,
}

impl Snapshot {
    pub fn new(cliffords: Vec<u8>, outcomes: Vec<u8>) -> Result<Self> {
        if cliffords.len() != outcomes.len() || cliffords.is_empty() {
            return Err(OtocError::InvalidArgument(
                "snapshot needs one Clifford and one outcome per qubit".into(),
            ));
        }
        if cliffords.iter().any(|&c| c as usize >= NUM_CLIFFORDS) || outcomes.iter().any(|&b| b > 1) {
            return Err(OtocError::InvalidArgument(
                "Clifford index must be < 24 and outcomes 0 or 1".into(),
            ));
        }
        Ok(Self { cliffords, outcomes })
    }

    pub fn num_qubits(&self) -> usize {
        self.cliffords.len()
    }

    pub fn cliffords(&self) -> &[u8] {
        &self.cliffords
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.outcomes
    }

    /// Stabilizer label (0..6) of qubit `q`'s factor.
    pub fn label(&self, q: usize) -> u8 {
        outcome_label(self.cliffords[q], self.outcomes[q])
    }

    pub fn labels(&self) -> Vec<u8> {
        (0..self.num_qubits()).map(|q| self.label(q)).collect()
    }

    pub fn factor(&self, q: usize) -> Mat2 {
        snapshot_factors()[self.label(q) as usize]
    }
}

/// Kronecker product of the per-qubit factors, `≤ 6` qubits.
pub fn snapshot_to_dense(s: &Snapshot) -> Result<DenseOperator> {
    if s.num_qubits() > MAX_DENSE_SNAPSHOT_QUBITS {
        return Err(out_of_range("num_qubits", s.num_qubits(), "<= 6"));
    }
    let mut acc = DenseOperator::identity(1);
    for q in 0..s.num_qubits() {
        let f = s.factor(q);
        let m = DenseOperator::from_fn(2, |r, c| f[r][c]);
        acc = acc.kron(&m);
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowMeta {
    pub protocol: String,
    pub n: usize,
    pub t: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shadow {
    pub meta: ShadowMeta,
    snapshots: Vec<Snapshot>,
}

impl Shadow {
    pub fn new(meta: ShadowMeta, snapshots: Vec<Snapshot>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| OtocError::InvalidArgument("a shadow needs K >= 1".into()))?;
        if snapshots.iter().any(|s| s.num_qubits() != first.num_qubits()) {
            return Err(OtocError::InvalidArgument(
                "snapshots differ in qubit count".into(),
            ));
        }
        if meta.k != snapshots.len() {
            return Err(OtocError::InvalidArgument(format!(
                "header says K = {} but there are {} snapshots",
                meta.k,
                snapshots.len()
            )));
        }
        Ok(Self { meta, snapshots })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn num_qubits(&self) -> usize {
        self.snapshots[0].num_qubits()
    }

    /// Row-major `K × num_qubits` stabilizer labels.
    pub fn label_matrix(&self) -> Vec<u8> {
        self.snapshots.iter().flat_map(Snapshot::labels).collect()
    }

    /// Mean of the dense snapshots, `≤ 6` qubits.
    pub fn mean_dense(&self) -> Result<DenseOperator> {
        let mut acc = DenseOperator::zeros(1 << self.num_qubits());
        for s in &self.snapshots {
            acc = acc.add(&snapshot_to_dense(s)?)?;
        }
        Ok(acc.scale_real(1.0 / self.len() as f64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PrepTag {
    MixedProtocol { n: usize, t: f64 },
    BellDual { n: usize, t: f64 },
    SingleBell { n: usize, t: f64, bell_qubit: usize },
    Explicit,
    ExplicitMixture,
}

impl PrepTag {
    pub fn protocol_name(&self) -> &'static str {
        match self {
            PrepTag::MixedProtocol { .. } => "mixed",
            PrepTag::BellDual { .. } => "multi_bell",
            PrepTag::SingleBell { .. } => "single_bell",
            PrepTag::Explicit => "explicit",
            PrepTag::ExplicitMixture => "explicit_mixture",
        }
    }

    pub fn system_qubits(&self) -> Option<usize> {
        match *self {
            PrepTag::MixedProtocol { n, .. }
            | PrepTag::BellDual { n, .. }
            | PrepTag::SingleBell { n, .. } => Some(n),
            _ => None,
        }
    }

    pub fn time(&self) -> f64 {
        match *self {
            PrepTag::MixedProtocol { t, .. }
            | PrepTag::BellDual { t, .. }
            | PrepTag::SingleBell { t, .. } => t,
            _ => 0.0,
        }
    }
}

/// A state given as a mixture of pure states, so that measurement can
/// always be simulated by Born sampling a state vector.
#[derive(Clone, Debug)]
pub struct StatePrep {
    tag: PrepTag,
    members: Vec<StateVector>,
    // None means equal weights
    cumulative: Option<Vec<f64>>,
}

impl StatePrep {
    pub fn mixed_protocol(spec: &HamiltonianSpectrum, t: f64) -> Result<Self> {
        let members = mixed_protocol_ensemble(&evolution_operator(spec, t))?;
        Ok(Self {
            tag: PrepTag::MixedProtocol {
                n: spec.num_qubits(),
                t,
            },
            members,
            cumulative: None,
        })
    }

    pub fn bell_dual(spec: &HamiltonianSpectrum, t: f64) -> Result<Self> {
        let n = spec.num_qubits();
        if 2 * n > MAX_SAMPLED_QUBITS {
            return Err(out_of_range("2n", 2 * n, "<= 14"));
        }
        Ok(Self {
            tag: PrepTag::BellDual { n, t },
            members: vec![bell_dual_vector(&evolution_operator(spec, t))?],
            cumulative: None,
        })
    }

    pub fn single_bell(spec: &HamiltonianSpectrum, t: f64, bell_qubit: usize) -> Result<Self> {
        let members = single_bell_ensemble(&evolution_operator(spec, t), bell_qubit)?;
        Ok(Self {
            tag: PrepTag::SingleBell {
                n: spec.num_qubits(),
                t,
                bell_qubit,
            },
            members,
            cumulative: None,
        })
    }

    pub fn explicit(state: StateVector) -> Self {
        Self {
            tag: PrepTag::Explicit,
            members: vec![state],
            cumulative: None,
        }
    }

    /// Weights must be non-negative and sum to one.
    pub fn explicit_mixture(weighted: Vec<(f64, StateVector)>) -> Result<Self> {
        if weighted.is_empty() {
            return Err(OtocError::InvalidState("empty mixture".into()));
        }
        if weighted.iter().any(|(w, _)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(OtocError::InvalidState("negative mixture weight".into()));
        }
        let total: f64 = weighted.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(OtocError::InvalidState(format!(
                "mixture weights sum to {total}"
            )));
        }
        let q = weighted[0].1.num_qubits();
        if weighted.iter().any(|(_, s)| s.num_qubits() != q) {
            return Err(OtocError::InvalidState(
                "mixture members differ in qubit count".into(),
            ));
        }
        let mut acc = 0.0;
        let mut cumulative = Vec::with_capacity(weighted.len());
        let mut members = Vec::with_capacity(weighted.len());
        for (w, s) in weighted {
            acc += w;
            cumulative.push(acc);
            members.push(s);
        }
        Ok(Self {
            tag: PrepTag::ExplicitMixture,
            members,
            cumulative: Some(cumulative),
        })
    }

    pub fn tag(&self) -> &PrepTag {
        &self.tag
    }

    pub fn num_qubits(&self) -> usize {
        self.members[0].num_qubits()
    }

    pub fn members(&self) -> &[StateVector] {
        &self.members
    }

    /// Dense density matrix of the ensemble.
    pub fn density(&self) -> Result<DenseOperator> {
        if self.num_qubits() > 12 {
            return Err(out_of_range("num_qubits", self.num_qubits(), "<= 12"));
        }
        match &self.cumulative {
            None => Ok(ensemble_density(&self.members)),
            Some(cum) => {
                let mut rho = DenseOperator::zeros(self.members[0].dim());
                let mut prev = 0.0;
                for (s, &c) in self.members.iter().zip(cum) {
                    rho = rho.add(&s.density_matrix().scale_real(c - prev))?;
                    prev = c;
                }
                Ok(rho)
            }
        }
    }

    fn pick_member(&self, rng: &mut RandomStream) -> &StateVector {
        match &self.cumulative {
            _ if self.members.len() == 1 => &self.members[0],
            None => &self.members[rng.below(self.members.len())],
            Some(cum) => {
                let u = rng.next_f64() * cum[cum.len() - 1];
                let idx = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
                &self.members[idx]
            }
        }
    }
}

fn apply_single_qubit(amps: &mut [Complex64], m: usize, q: usize, g: &Mat2) {
    let stride = 1usize << (m - 1 - q);
    for base in 0..amps.len() {
        if base & stride != 0 {
            continue;
        }
        let (a0, a1) = (amps[base], amps[base | stride]);
        amps[base] = g[0][0] * a0 + g[0][1] * a1;
        amps[base | stride] = g[1][0] * a0 + g[1][1] * a1;
    }
}

/// Draw a member of the ensemble, a uniform Clifford per qubit, and a Born
/// outcome of the rotated state.
pub fn sample_snapshot(prep: &StatePrep, rng: &mut RandomStream) -> Result<Snapshot> {
    let m = prep.num_qubits();
    if m > MAX_SAMPLED_QUBITS {
        return Err(out_of_range("num_qubits", m, "<= 14"));
    }
    let member = prep.pick_member(rng);
    let table = clifford_table();
    let cliffords: Vec<u8> = (0..m).map(|_| rng.below(table.len()) as u8).collect();
    let mut amps = member.amplitudes().to_vec();
    for (q, &c) in cliffords.iter().enumerate() {
        apply_single_qubit(&mut amps, m, q, &table[c as usize].matrix);
    }
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut index = amps.len() - 1;
    for (i, a) in amps.iter().enumerate() {
        acc += a.norm_sqr();
        if u < acc {
            index = i;
            break;
        }
    }
    let outcomes = (0..m).map(|q| ((index >> (m - 1 - q)) & 1) as u8).collect();
    Snapshot::new(cliffords, outcomes)
}

/// `K` snapshots; snapshot `i` draws from substream `i` of `seed`, so the
/// result does not depend on the thread count.
pub fn build_shadow(prep: &StatePrep, k: usize, seed: Seed) -> Result<Shadow> {
    if k == 0 {
        return Err(out_of_range("K", k, ">= 1"));
    }
    let base = RandomStream::new(seed);
    let snapshots = (0..k as u64)
        .into_par_iter()
        .map(|i| sample_snapshot(prep, &mut base.substream(i)))
        .collect::<Result<Vec<_>>>()?;
    let tag = prep.tag();
    let meta = ShadowMeta {
        protocol: tag.protocol_name().to_string(),
        n: tag.system_qubits().unwrap_or(prep.num_qubits()),
        t: tag.time(),
        k,
        seed: seed.0,
    };
    Shadow::new(meta, snapshots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::IsingParams;
    use crate::qlinalg::{PauliString, StateVector};

    fn random_state(num_qubits: usize, seed: u64) -> StateVector {
        let mut rng = RandomStream::new(Seed(seed));
        let amps = (0..1 << num_qubits)
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        StateVector::normalized(amps).unwrap()
    }

    #[test]
    fn factors_and_dense_form() {
        let prep = StatePrep::explicit(random_state(3, 1));
        let mut rng = RandomStream::new(Seed(2));
        for _ in 0..50 {
            let s = sample_snapshot(&prep, &mut rng).unwrap();
            let dense = snapshot_to_dense(&s).unwrap();
            assert!((dense.trace().re - 1.0).abs() < 1e-12);
            let p: PauliString = ["XYZ", "ZIX", "IYY", "ZZZ"][rng.below(4)].parse().unwrap();
            let lhs = p.matrix().trace_product(&dense).unwrap();
            let rhs: Complex64 = (0..3)
                .map(|q| {
                    let f = s.factor(q);
                    let pm = p.letter(q).matrix();
                    (0..2).map(|r| (0..2).map(|c| pm[r][c] * f[c][r]).sum::<Complex64>()).sum::<Complex64>()
                })
                .product();
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn single_qubit_snapshot_is_its_factor() {
        let prep = StatePrep::explicit(random_state(1, 3));
        let s = sample_snapshot(&prep, &mut RandomStream::new(Seed(4))).unwrap();
        let d = snapshot_to_dense(&s).unwrap();
        let f = s.factor(0);
        assert!(d.distance(&DenseOperator::from_fn(2, |r, c| f[r][c])).unwrap() < 1e-15);
    }

    #[test]
    fn shadow_is_deterministic_and_thread_independent() {
        let prep = StatePrep::explicit(random_state(2, 5));
        let a = build_shadow(&prep, 300, Seed(9)).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| build_shadow(&prep, 300, Seed(9)).unwrap());
        assert_eq!(a, b);
        let c = build_shadow(&prep, 300, Seed(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn arity_of_bell_dual_snapshots() {
        let spec = HamiltonianSpectrum::new(1, IsingParams::default()).unwrap();
        let prep = StatePrep::bell_dual(&spec, 0.0).unwrap();
        let sh = build_shadow(&prep, 4, Seed(0)).unwrap();
        assert!(sh.snapshots().iter().all(|s| s.num_qubits() == 2));
        assert_eq!(sh.meta.protocol, "multi_bell");
    }

    #[test]
    fn mixture_validation() {
        let a = random_state(1, 6);
        let b = random_state(1, 7);
        assert!(StatePrep::explicit_mixture(vec![(0.5, a.clone()), (0.6, b.clone())]).is_err());
        assert!(StatePrep::explicit_mixture(vec![(-0.1, a.clone()), (1.1, b.clone())]).is_err());
        let prep = StatePrep::explicit_mixture(vec![(0.25, a.clone()), (0.75, b.clone())]).unwrap();
        let rho = prep.density().unwrap();
        let expect = a
            .density_matrix()
            .scale_real(0.25)
            .add(&b.density_matrix().scale_real(0.75))
            .unwrap();
        assert!(rho.distance(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn sampled_ensembles_match_dense_states() {
        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let rho = crate::dynamics::prepare_mixed_protocol_state(2, &spec, 1.3).unwrap();
        let prep = StatePrep::mixed_protocol(&spec, 1.3).unwrap();
        assert!(prep.density().unwrap().distance(&rho).unwrap() < 1e-12);
        let rho = crate::dynamics::prepare_single_bell_state(2, &spec, 1.3, 2).unwrap();
        let prep = StatePrep::single_bell(&spec, 1.3, 2).unwrap();
        assert!(prep.density().unwrap().distance(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn shadow_mean_is_unbiased() {
        let psi = random_state(2, 11);
        let rho = psi.density_matrix();
        let prep = StatePrep::explicit(psi);
        let k = 100_000;
        let sh = build_shadow(&prep, k, Seed(12)).unwrap();
        // per-Pauli expectation with a 4σ gate; single-shot variance ≤ 3^w
        for p in ["XI", "ZY", "YY", "IZ", "XZ"] {
            let pm: PauliString = p.parse().unwrap();
            let target = pm.matrix().trace_product(&rho).unwrap().re;
            let weight = pm.support().len() as i32;
            let mean: f64 = sh
                .snapshots()
                .iter()
                .map(|s| {
                    (0..2)
                        .map(|q| {
                            let f = s.factor(q);
                            let m = pm.letter(q).matrix();
                            (m[0][0] * f[0][0] + m[0][1] * f[1][0] + m[1][0] * f[0][1] + m[1][1] * f[1][1]).re
                        })
                        .product::<f64>()
                })
                .sum::<f64>()
                / k as f64;
            let se = (3f64.powi(weight) / k as f64).sqrt();
            assert!((mean - target).abs() < 4.0 * se, "{p}: {mean} vs {target}");
        }
    }
}
