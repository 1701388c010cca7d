//! Tensor-network observables on `c` snapshot copies and their factorized
//! evaluation.
//!
//! An [`ObservableSpec`] describes `Tr{T · (⊗_j P_j) · (⊗_j ρ̂_j)}` (side
//! `Left`) or `Tr{T · (⊗_j ρ̂_j) · (⊗_j P_j)}` (side `Right`), where `T` acts
//! on qubit `q` of every copy as the copy permutation `wiring[q]`. Because
//! snapshots and Pauli strings are tensor products over qubits, the trace
//! splits into a product over qubits and cycles of 2×2 chain traces.

use num_complex::Complex64;

use crate::error::{OtocError, Result};
use crate::qlinalg::dense::ONE;
use crate::qlinalg::{all_permutations, Mat2, Pauli, PauliString, Permutation};
use crate::shadows::clifford::{mat_mul, mat_trace, snapshot_factors, NUM_STABILIZER_STATES};
use crate::shadows::Snapshot;

/// Longest cycle that gets a full lookup table (6^6 entries).
const MAX_TABLE_CYCLE: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Chain elements are `P_j ρ̂_j`.
    Left,
    /// Chain elements are `ρ̂_j P_j`.
    Right,
}

#[derive(Clone, Debug)]
pub struct ObservableSpec {
    pub copies: usize,
    pub num_qubits: usize,
    pub factors: Vec<PauliString>,
    pub wiring: Vec<Permutation>,
    pub side: Side,
    pub prefactor: f64,
    /// Copy orderings averaged per unordered subset. Must be a reduction of
    /// the full symmetrization: averaging over these equals averaging over
    /// all `c!` orderings.
    pub orderings: Vec<Permutation>,
}

impl ObservableSpec {
    pub fn new(
        factors: Vec<PauliString>,
        wiring: Vec<Permutation>,
        side: Side,
        prefactor: f64,
    ) -> Result<Self> {
        let copies = factors.len();
        let num_qubits = wiring.len();
        if copies == 0 || num_qubits == 0 {
            return Err(OtocError::InvalidArgument(
                "observable needs at least one copy and one qubit".into(),
            ));
        }
        if factors.iter().any(|p| p.num_qubits() != num_qubits) {
            return Err(OtocError::DimensionMismatch(
                "every Pauli factor must act on all snapshot qubits".into(),
            ));
        }
        if wiring.iter().any(|p| p.size() != copies) {
            return Err(OtocError::DimensionMismatch(
                "every qubit permutation must have one point per copy".into(),
            ));
        }
        Ok(Self {
            copies,
            num_qubits,
            factors,
            wiring,
            side,
            prefactor,
            orderings: all_permutations(copies),
        })
    }

    /// Same copy permutation on every qubit.
    pub fn uniform(
        factors: Vec<PauliString>,
        perm: Permutation,
        side: Side,
        prefactor: f64,
    ) -> Result<Self> {
        let n = factors.first().map(PauliString::num_qubits).unwrap_or(0);
        Self::new(factors, vec![perm; n], side, prefactor)
    }

    pub fn with_orderings(mut self, orderings: Vec<Permutation>) -> Result<Self> {
        if orderings.is_empty() || orderings.iter().any(|p| p.size() != self.copies) {
            return Err(OtocError::InvalidArgument(
                "orderings must be non-empty permutations of the copies".into(),
            ));
        }
        self.orderings = orderings;
        Ok(self)
    }

    pub fn compile(&self) -> CompiledObservable {
        CompiledObservable::new(self)
    }
}

/// Per-qubit dressed factor for `letter` and snapshot label.
pub(crate) fn dressed(letter: Pauli, label: u8, side: Side) -> Mat2 {
    let f = &snapshot_factors()[label as usize];
    let p = letter.matrix();
    match side {
        Side::Left => mat_mul(&p, f),
        Side::Right => mat_mul(f, &p),
    }
}

#[derive(Clone, Debug)]
struct CycleTable {
    qubit: usize,
    copies: Vec<usize>,
    letters: Vec<Pauli>,
    side: Side,
    table: Option<Vec<Complex64>>,
}

impl CycleTable {
    fn new(qubit: usize, copies: Vec<usize>, letters: Vec<Pauli>, side: Side) -> Self {
        let mut ct = Self {
            qubit,
            copies,
            letters,
            side,
            table: None,
        };
        let len = ct.copies.len();
        if len <= MAX_TABLE_CYCLE {
            let size = NUM_STABILIZER_STATES.pow(len as u32);
            let mut labels = vec![0u8; len];
            let table = (0..size)
                .map(|idx| {
                    let mut rest = idx;
                    for l in labels.iter_mut() {
                        *l = (rest % NUM_STABILIZER_STATES) as u8;
                        rest /= NUM_STABILIZER_STATES;
                    }
                    ct.chain(&labels)
                })
                .collect();
            ct.table = Some(table);
        }
        ct
    }

    fn chain(&self, labels: &[u8]) -> Complex64 {
        let mut acc = dressed(self.letters[0], labels[0], self.side);
        for (i, &l) in labels.iter().enumerate().skip(1) {
            acc = mat_mul(&acc, &dressed(self.letters[i], l, self.side));
        }
        mat_trace(&acc)
    }

    #[inline]
    fn eval(&self, rows: &[&[u8]]) -> Complex64 {
        match &self.table {
            Some(t) => {
                let mut idx = 0usize;
                for &c in self.copies.iter().rev() {
                    idx = idx * NUM_STABILIZER_STATES + rows[c][self.qubit] as usize;
                }
                t[idx]
            }
            None => {
                let labels: Vec<u8> = self.copies.iter().map(|&c| rows[c][self.qubit]).collect();
                self.chain(&labels)
            }
        }
    }
}

/// Lookup-table form of an [`ObservableSpec`]; evaluating one tuple costs
/// one table read per (qubit, cycle).
#[derive(Clone, Debug)]
pub struct CompiledObservable {
    copies: usize,
    num_qubits: usize,
    phase: Complex64,
    cycles: Vec<CycleTable>,
}

impl CompiledObservable {
    fn new(spec: &ObservableSpec) -> Self {
        let phase = spec
            .factors
            .iter()
            .fold(ONE, |acc, p| acc * p.phase_value());
        let mut cycles = Vec::new();
        for (q, perm) in spec.wiring.iter().enumerate() {
            for cycle in perm.cycles() {
                let letters = cycle.iter().map(|&j| spec.factors[j].letter(q)).collect();
                cycles.push(CycleTable::new(q, cycle, letters, spec.side));
            }
        }
        Self {
            copies: spec.copies,
            num_qubits: spec.num_qubits,
            phase,
            cycles,
        }
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Trace for one tuple; `rows[j]` holds the labels of the snapshot in
    /// copy `j`.
    #[inline]
    pub fn eval(&self, rows: &[&[u8]]) -> Complex64 {
        let mut acc = self.phase;
        for c in &self.cycles {
            acc *= c.eval(rows);
        }
        acc
    }
}

/// `Tr{T·(⊗P_j)·(⊗ρ̂_j)}` (or the `Right` variant) for one tuple of
/// snapshots, excluding `prefactor`.
pub fn factorized_tuple_trace(snapshots: &[&Snapshot], obs: &ObservableSpec) -> Result<Complex64> {
    if snapshots.len() != obs.copies {
        return Err(OtocError::DimensionMismatch(format!(
            "{} snapshots for an observable on {} copies",
            snapshots.len(),
            obs.copies
        )));
    }
    if snapshots.iter().any(|s| s.num_qubits() != obs.num_qubits) {
        return Err(OtocError::DimensionMismatch(format!(
            "observable acts on {} qubits per copy",
            obs.num_qubits
        )));
    }
    let labels: Vec<Vec<u8>> = snapshots.iter().map(|s| s.labels()).collect();
    let rows: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
    Ok(obs.compile().eval(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{kron_all, permutation_operator, DenseOperator};
    use crate::rng::{RandomStream, Seed};
    use crate::shadows::snapshot_to_dense;

    fn random_snapshot(m: usize, rng: &mut RandomStream) -> Snapshot {
        let c = (0..m).map(|_| rng.below(24) as u8).collect();
        let b = (0..m).map(|_| rng.below(2) as u8).collect();
        Snapshot::new(c, b).unwrap()
    }

    fn random_pauli(m: usize, rng: &mut RandomStream) -> PauliString {
        let letters = (0..m)
            .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.below(4)])
            .collect();
        PauliString::new(letters, rng.below(4) as u8)
    }

    fn random_perm(k: usize, rng: &mut RandomStream) -> Permutation {
        let all = all_permutations(k);
        all[rng.below(all.len())].clone()
    }

    /// Dense evaluation: wire `j·m + q` is qubit `q` of copy `j`.
    fn dense_trace(snaps: &[&Snapshot], obs: &ObservableSpec) -> Complex64 {
        let (c, m) = (obs.copies, obs.num_qubits);
        let images: Vec<usize> = (0..c * m)
            .map(|w| obs.wiring[w % m].apply(w / m) * m + w % m)
            .collect();
        let t = permutation_operator(&Permutation::from_images(images).unwrap(), 2).unwrap();
        let p_mats: Vec<DenseOperator> = obs.factors.iter().map(PauliString::matrix).collect();
        let r_mats: Vec<DenseOperator> = snaps.iter().map(|s| snapshot_to_dense(s).unwrap()).collect();
        let p = kron_all(&p_mats.iter().collect::<Vec<_>>());
        let r = kron_all(&r_mats.iter().collect::<Vec<_>>());
        let inner = match obs.side {
            Side::Left => p.matmul(&r).unwrap(),
            Side::Right => r.matmul(&p).unwrap(),
        };
        t.trace_product(&inner).unwrap()
    }

    #[test]
    fn identity_wiring_without_paulis_is_one() {
        let mut rng = RandomStream::new(Seed(1));
        let snaps: Vec<Snapshot> = (0..3).map(|_| random_snapshot(2, &mut rng)).collect();
        let refs: Vec<&Snapshot> = snaps.iter().collect();
        let obs = ObservableSpec::uniform(vec![PauliString::identity(2); 3], Permutation::identity(3), Side::Left, 1.0).unwrap();
        assert!((factorized_tuple_trace(&refs, &obs).unwrap() - ONE).norm() < 1e-12);
    }

    #[test]
    fn swap_matches_dense() {
        let mut rng = RandomStream::new(Seed(2));
        for _ in 0..20 {
            let snaps: Vec<Snapshot> = (0..2).map(|_| random_snapshot(2, &mut rng)).collect();
            let refs: Vec<&Snapshot> = snaps.iter().collect();
            let obs = ObservableSpec::uniform(vec![PauliString::identity(2); 2], Permutation::forward_cycle(2), Side::Left, 1.0).unwrap();
            let e = factorized_tuple_trace(&refs, &obs).unwrap() - dense_trace(&refs, &obs);
            assert!(e.norm() < 1e-10);
        }
    }

    #[test]
    fn four_cycle_with_w_matches_dense() {
        let mut rng = RandomStream::new(Seed(3));
        let w: PauliString = "ZI".parse().unwrap();
        let obs = ObservableSpec::uniform(vec![w; 4], Permutation::forward_cycle(4), Side::Left, 1.0).unwrap();
        for _ in 0..200 {
            let snaps: Vec<Snapshot> = (0..4).map(|_| random_snapshot(2, &mut rng)).collect();
            let refs: Vec<&Snapshot> = snaps.iter().collect();
            let e = factorized_tuple_trace(&refs, &obs).unwrap() - dense_trace(&refs, &obs);
            assert!(e.norm() < 1e-10);
        }
    }

    #[test]
    fn random_configurations_match_dense() {
        let mut rng = RandomStream::new(Seed(4));
        for _ in 0..200 {
            let c = 1 + rng.below(4);
            let max_m = (8 / c).min(6);
            let m = 1 + rng.below(max_m);
            let factors = (0..c).map(|_| random_pauli(m, &mut rng)).collect();
            let wiring = (0..m).map(|_| random_perm(c, &mut rng)).collect();
            let side = if rng.below(2) == 0 { Side::Left } else { Side::Right };
            let obs = ObservableSpec::new(factors, wiring, side, 1.0).unwrap();
            let snaps: Vec<Snapshot> = (0..c).map(|_| random_snapshot(m, &mut rng)).collect();
            let refs: Vec<&Snapshot> = snaps.iter().collect();
            let e = factorized_tuple_trace(&refs, &obs).unwrap() - dense_trace(&refs, &obs);
            assert!(e.norm() < 1e-10, "c={c} m={m}");
        }
    }

    #[test]
    fn long_cycles_fall_back_to_chains() {
        let mut rng = RandomStream::new(Seed(5));
        let c = 7;
        let factors: Vec<PauliString> = (0..c).map(|_| random_pauli(1, &mut rng)).collect();
        let obs = ObservableSpec::new(factors, vec![Permutation::forward_cycle(c)], Side::Right, 1.0).unwrap();
        let snaps: Vec<Snapshot> = (0..c).map(|_| random_snapshot(1, &mut rng)).collect();
        let refs: Vec<&Snapshot> = snaps.iter().collect();
        let got = factorized_tuple_trace(&refs, &obs).unwrap();
        let mats: Vec<DenseOperator> = refs
            .iter()
            .zip(&obs.factors)
            .map(|(s, p)| snapshot_to_dense(s).unwrap().matmul(&p.matrix()).unwrap())
            .collect();
        let chain = DenseOperator::product(&mats.iter().collect::<Vec<_>>()).unwrap().trace();
        assert!((got - chain).norm() < 1e-9);
    }

    #[test]
    fn arity_errors() {
        let mut rng = RandomStream::new(Seed(6));
        let s = random_snapshot(2, &mut rng);
        let obs = ObservableSpec::uniform(vec![PauliString::identity(2); 2], Permutation::identity(2), Side::Left, 1.0).unwrap();
        assert!(factorized_tuple_trace(&[&s], &obs).is_err());
        let s3 = random_snapshot(3, &mut rng);
        assert!(factorized_tuple_trace(&[&s, &s3], &obs).is_err());
        assert!(ObservableSpec::new(vec![PauliString::identity(2)], vec![Permutation::identity(2)], Side::Left, 1.0).is_err());
    }
}
