//! U-statistics over snapshot tuples.
//!
//! Exhaustive mode averages the kernel over every tuple of distinct
//! snapshots; subsampled mode averages it over uniformly drawn subsets.
//! Parallel sums are split into chunks whose boundaries depend only on the
//! input, and the chunk partials are added in order, so results are
//! bit-identical for any thread count.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::observable::{dressed, CompiledObservable, ObservableSpec};
use crate::error::{OtocError, Result};
use crate::qlinalg::dense::{ONE, ZERO};
use crate::qlinalg::{Mat2, Pauli, Permutation};
use crate::rng::{RandomStream, Seed};
use crate::shadows::clifford::{mat_mul, mat_trace, NUM_STABILIZER_STATES};
use crate::shadows::Shadow;

const SUBSAMPLE_CHUNK: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Exhaustive,
    Subsampled { samples: u64, seed: Seed },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exhaustive => "exhaustive",
            Mode::Subsampled { .. } => "subsampled",
        }
    }
}

/// Snapshot labels as a dense `K × m` table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMatrix {
    k: usize,
    m: usize,
    data: Vec<u8>,
}

impl LabelMatrix {
    pub fn from_shadow(shadow: &Shadow) -> Self {
        Self {
            k: shadow.len(),
            m: shadow.num_qubits(),
            data: shadow.label_matrix(),
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(OtocError::InvalidArgument("ragged label rows".into()));
        }
        Ok(Self {
            k: rows.len(),
            m,
            data: rows.concat(),
        })
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn num_qubits(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    /// Distinct rows with multiplicities, in lexicographic order.
    fn histogram(&self) -> Vec<(&[u8], f64)> {
        let mut h: BTreeMap<&[u8], usize> = BTreeMap::new();
        for i in 0..self.k {
            *h.entry(self.row(i)).or_default() += 1;
        }
        h.into_iter().map(|(r, n)| (r, n as f64)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UStat {
    /// `prefactor × mean kernel`.
    pub value: Complex64,
    pub num_terms: u64,
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128) as u64
}

fn ordered_sum(parts: Vec<Complex64>) -> Complex64 {
    parts.into_iter().fold(ZERO, |a, b| a + b)
}

/// One-sample U-statistic of `obs` over `labels`.
pub fn u_statistic(labels: &LabelMatrix, obs: &ObservableSpec, mode: &Mode) -> Result<UStat> {
    let c = obs.copies;
    if labels.num_qubits() != obs.num_qubits {
        return Err(OtocError::ShadowMismatch(format!(
            "snapshots have {} qubits, observable expects {}",
            labels.num_qubits(),
            obs.num_qubits
        )));
    }
    if labels.len() < c {
        return Err(OtocError::NotEnoughSnapshots {
            needed: c,
            got: labels.len(),
        });
    }
    let compiled = obs.compile();
    let orderings = &obs.orderings;
    match *mode {
        Mode::Exhaustive => {
            let subsets = binomial_u64(labels.len(), c);
            let num_terms = subsets.saturating_mul(orderings.len() as u64);
            let mean = if histogram_cost(labels, c) < direct_cost(labels.len(), c, orderings.len()) {
                histogram_mean(labels, &compiled)
            } else {
                direct_mean(labels, &compiled, orderings)
            };
            Ok(UStat {
                value: mean * obs.prefactor,
                num_terms,
            })
        }
        Mode::Subsampled { samples, seed } => {
            if samples == 0 {
                return Err(OtocError::InvalidArgument("zero subsamples".into()));
            }
            let mean = subsampled_mean(labels, &compiled, orderings, samples, seed);
            Ok(UStat {
                value: mean * obs.prefactor,
                num_terms: samples * orderings.len() as u64,
            })
        }
    }
}

fn direct_cost(k: usize, c: usize, orderings: usize) -> f64 {
    binomial_u64(k, c) as f64 * orderings as f64
}

fn histogram_cost(labels: &LabelMatrix, c: usize) -> f64 {
    let types = labels.histogram().len() as f64;
    set_partitions(c)
        .iter()
        .map(|p| types.powi(p.len() as i32))
        .sum()
}

/// All set partitions of `0..c` as lists of blocks.
fn set_partitions(c: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, c: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == c {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, c, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, c, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, c, &mut Vec::new(), &mut out);
    out
}

/// Möbius function of the partition lattice from the finest partition.
fn mobius(partition: &[Vec<usize>]) -> f64 {
    partition
        .iter()
        .map(|b| {
            let s = b.len();
            let sign = if s % 2 == 1 { 1.0 } else { -1.0 };
            sign * (1..s).map(|x| x as f64).product::<f64>()
        })
        .product()
}

/// Exact mean over all ordered tuples of distinct snapshots, computed from
/// the histogram of distinct label rows:
/// `Σ_distinct = Σ_P μ(P) Σ_{types per block} Π n_t · g`.
fn histogram_mean(labels: &LabelMatrix, obs: &CompiledObservable) -> Complex64 {
    let c = obs.copies();
    let hist = labels.histogram();
    let types = hist.len();
    let mut total = ZERO;
    for partition in set_partitions(c) {
        let mu = mobius(&partition);
        let b = partition.len();
        let mut block_of = vec![0usize; c];
        for (bi, block) in partition.iter().enumerate() {
            for &j in block {
                block_of[j] = bi;
            }
        }
        let parts: Vec<Complex64> = (0..types)
            .into_par_iter()
            .map(|first| {
                let mut assign = vec![0usize; b];
                assign[0] = first;
                let mut rows: Vec<&[u8]> = vec![hist[0].0; c];
                let mut acc = ZERO;
                loop {
                    let mut weight = 1.0;
                    for &t in &assign {
                        weight *= hist[t].1;
                    }
                    for j in 0..c {
                        rows[j] = hist[assign[block_of[j]]].0;
                    }
                    acc += obs.eval(&rows) * weight;
                    // odometer over blocks 1..b
                    let mut pos = b;
                    loop {
                        if pos == 1 {
                            return acc;
                        }
                        pos -= 1;
                        assign[pos] += 1;
                        if assign[pos] < types {
                            break;
                        }
                        assign[pos] = 0;
                    }
                }
            })
            .collect();
        total += ordered_sum(parts) * mu;
    }
    let falling: f64 = (0..c).map(|j| (labels.len() - j) as f64).product();
    total / falling
}

/// Mean over every `c`-subset and every listed ordering, enumerated
/// directly.
fn direct_mean(labels: &LabelMatrix, obs: &CompiledObservable, orderings: &[Permutation]) -> Complex64 {
    let c = obs.copies();
    let k = labels.len();
    let parts: Vec<Complex64> = (0..=k - c)
        .into_par_iter()
        .map(|first| {
            let mut subset: Vec<usize> = (first..first + c).collect();
            let mut rows: Vec<&[u8]> = vec![labels.row(0); c];
            let mut acc = ZERO;
            loop {
                for sigma in orderings {
                    for j in 0..c {
                        rows[j] = labels.row(subset[sigma.apply(j)]);
                    }
                    acc += obs.eval(&rows);
                }
                // next combination with subset[0] fixed
                let mut pos = c;
                loop {
                    if pos == 1 {
                        return acc;
                    }
                    pos -= 1;
                    if subset[pos] < k - (c - pos) {
                        subset[pos] += 1;
                        for q in pos + 1..c {
                            subset[q] = subset[q - 1] + 1;
                        }
                        break;
                    }
                }
            }
        })
        .collect();
    let terms = binomial_u64(k, c) as f64 * orderings.len() as f64;
    ordered_sum(parts) / terms
}

/// `c` distinct indices below `k`, ascending.
fn draw_subset(rng: &mut RandomStream, k: usize, c: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::with_capacity(c);
    // Floyd's algorithm
    for j in k - c..k {
        let r = rng.below(j + 1);
        if picked.contains(&r) {
            picked.push(j);
        } else {
            picked.push(r);
        }
    }
    picked.sort_unstable();
    picked
}

fn subsampled_mean(
    labels: &LabelMatrix,
    obs: &CompiledObservable,
    orderings: &[Permutation],
    samples: u64,
    seed: Seed,
) -> Complex64 {
    let c = obs.copies();
    let base = RandomStream::new(seed);
    let chunks = samples.div_ceil(SUBSAMPLE_CHUNK);
    let parts: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rows: Vec<&[u8]> = vec![labels.row(0); c];
            let mut acc = ZERO;
            let end = ((chunk + 1) * SUBSAMPLE_CHUNK).min(samples);
            for s in chunk * SUBSAMPLE_CHUNK..end {
                let subset = draw_subset(&mut base.substream(s), labels.len(), c);
                for sigma in orderings {
                    for j in 0..c {
                        rows[j] = labels.row(subset[sigma.apply(j)]);
                    }
                    acc += obs.eval(&rows);
                }
            }
            acc
        })
        .collect();
    ordered_sum(parts) / (samples as f64 * orderings.len() as f64)
}

/// Two-sample U-statistic for a four-copy observable whose copies 0 and 3
/// are filled from sample `a` and copies 1 and 2 from sample `b`, with
/// `i₀ ≠ i₃` and `i₁ ≠ i₂`.
pub fn two_sample_u_statistic(
    a: &LabelMatrix,
    b: &LabelMatrix,
    obs: &ObservableSpec,
    mode: &Mode,
) -> Result<UStat> {
    if obs.copies != 4 {
        return Err(OtocError::InvalidArgument(
            "two-sample statistic is defined for four copies".into(),
        ));
    }
    for s in [a, b] {
        if s.num_qubits() != obs.num_qubits {
            return Err(OtocError::ShadowMismatch(format!(
                "snapshots have {} qubits, observable expects {}",
                s.num_qubits(),
                obs.num_qubits
            )));
        }
        if s.len() < 2 {
            return Err(OtocError::NotEnoughSnapshots {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let (ka, kb) = (a.len() as u64, b.len() as u64);
    match *mode {
        Mode::Exhaustive => {
            let num_terms = (ka * (ka - 1)).saturating_mul(kb * (kb - 1));
            let mean = match PairSplit::new(obs) {
                Some(split) => split.mean(a, b),
                None => two_sample_direct(a, b, &obs.compile()),
            };
            Ok(UStat {
                value: mean * obs.prefactor,
                num_terms,
            })
        }
        Mode::Subsampled { samples, seed } => {
            if samples == 0 {
                return Err(OtocError::InvalidArgument("zero subsamples".into()));
            }
            let compiled = obs.compile();
            let base = RandomStream::new(seed);
            let chunks = samples.div_ceil(SUBSAMPLE_CHUNK);
            let parts: Vec<Complex64> = (0..chunks)
                .into_par_iter()
                .map(|chunk| {
                    let mut acc = ZERO;
                    let end = ((chunk + 1) * SUBSAMPLE_CHUNK).min(samples);
                    for s in chunk * SUBSAMPLE_CHUNK..end {
                        let mut rng = base.substream(s);
                        let pa = draw_subset(&mut rng, a.len(), 2);
                        let pb = draw_subset(&mut rng, b.len(), 2);
                        // random order inside each pair
                        let (i0, i3) = if rng.below(2) == 0 { (pa[0], pa[1]) } else { (pa[1], pa[0]) };
                        let (i1, i2) = if rng.below(2) == 0 { (pb[0], pb[1]) } else { (pb[1], pb[0]) };
                        acc += compiled.eval(&[a.row(i0), b.row(i1), b.row(i2), a.row(i3)]);
                    }
                    acc
                })
                .collect();
            Ok(UStat {
                value: ordered_sum(parts) / samples as f64 * obs.prefactor,
                num_terms: samples,
            })
        }
    }
}

fn two_sample_direct(a: &LabelMatrix, b: &LabelMatrix, obs: &CompiledObservable) -> Complex64 {
    let (ka, kb) = (a.len(), b.len());
    let parts: Vec<Complex64> = (0..ka)
        .into_par_iter()
        .map(|i0| {
            let mut acc = ZERO;
            for i3 in (0..ka).filter(|&x| x != i0) {
                for i1 in 0..kb {
                    for i2 in (0..kb).filter(|&x| x != i1) {
                        acc += obs.eval(&[a.row(i0), b.row(i1), b.row(i2), a.row(i3)]);
                    }
                }
            }
            acc
        })
        .collect();
    ordered_sum(parts) / ((ka * (ka - 1) * kb * (kb - 1)) as f64)
}

/// Exact two-sample sum when every qubit is either a fixed point or the
/// forward 4-cycle. Per cycled qubit `Tr{A₀A₁A₂A₃} = Σ (A₃A₀)_{xy} (A₁A₂)_{yx}`,
/// so the sum over `(i₀,i₃)` and `(i₁,i₂)` decouples into an inner product
/// of two summed tensors of dimension `4^{#cycled}`.
struct PairSplit {
    phase: Complex64,
    cycled: Vec<usize>,
    fixed: Vec<usize>,
    letters: [Vec<Pauli>; 4],
    side: super::observable::Side,
}

const MAX_SPLIT_CYCLED: usize = 8;

impl PairSplit {
    fn new(obs: &ObservableSpec) -> Option<Self> {
        let forward = Permutation::forward_cycle(4);
        let mut cycled = Vec::new();
        let mut fixed = Vec::new();
        for (q, p) in obs.wiring.iter().enumerate() {
            if p.is_identity() {
                fixed.push(q);
            } else if *p == forward {
                cycled.push(q);
            } else {
                return None;
            }
        }
        if cycled.len() > MAX_SPLIT_CYCLED {
            return None;
        }
        let phase = obs.factors.iter().fold(ONE, |acc, p| acc * p.phase_value());
        let letters = std::array::from_fn(|j| obs.factors[j].letters().to_vec());
        Some(Self {
            phase,
            cycled,
            fixed,
            letters,
            side: obs.side,
        })
    }

    fn dressed_table(&self, copy: usize, q: usize) -> [Mat2; NUM_STABILIZER_STATES] {
        std::array::from_fn(|l| dressed(self.letters[copy][q], l as u8, self.side))
    }

    /// `Σ_{x≠y} ⊗_q vec(pair(q, x, y))` with the fixed-qubit traces folded
    /// into the scalar weight.
    fn summed_tensor(&self, s: &LabelMatrix, first: usize, second: usize, transpose_product: bool) -> Vec<Complex64> {
        // pair products per cycled qubit, indexed by (label_x, label_y)
        let products: Vec<Vec<Mat2>> = self
            .cycled
            .iter()
            .map(|&q| {
                let tx = self.dressed_table(first, q);
                let ty = self.dressed_table(second, q);
                let mut out = Vec::with_capacity(36);
                for lx in 0..NUM_STABILIZER_STATES {
                    for ly in 0..NUM_STABILIZER_STATES {
                        // copy order inside the chain: A₃A₀ for sample a, A₁A₂ for sample b
                        let m = if transpose_product {
                            let p = mat_mul(&tx[lx], &ty[ly]);
                            [[p[0][0], p[1][0]], [p[0][1], p[1][1]]]
                        } else {
                            mat_mul(&ty[ly], &tx[lx])
                        };
                        out.push(m);
                    }
                }
                out
            })
            .collect();
        let traces: Vec<[[Complex64; NUM_STABILIZER_STATES]; 2]> = self
            .fixed
            .iter()
            .map(|&q| {
                let tx = self.dressed_table(first, q);
                let ty = self.dressed_table(second, q);
                [std::array::from_fn(|l| mat_trace(&tx[l])), std::array::from_fn(|l| mat_trace(&ty[l]))]
            })
            .collect();
        let dim = 1usize << (2 * self.cycled.len());
        let k = s.len();
        let parts: Vec<Vec<Complex64>> = (0..k)
            .into_par_iter()
            .map(|x| {
                let mut acc = vec![ZERO; dim];
                let mut tensor = vec![ZERO; dim];
                let rx = s.row(x);
                for y in (0..k).filter(|&y| y != x) {
                    let ry = s.row(y);
                    let mut scalar = ONE;
                    for (f, &q) in self.fixed.iter().enumerate() {
                        scalar *= traces[f][0][rx[q] as usize] * traces[f][1][ry[q] as usize];
                    }
                    tensor[0] = scalar;
                    let mut len = 1;
                    for (ci, &q) in self.cycled.iter().enumerate() {
                        let m = &products[ci][rx[q] as usize * NUM_STABILIZER_STATES + ry[q] as usize];
                        let flat = [m[0][0], m[0][1], m[1][0], m[1][1]];
                        for i in (0..len).rev() {
                            let v = tensor[i];
                            for (e, &f) in flat.iter().enumerate() {
                                tensor[i * 4 + e] = v * f;
                            }
                        }
                        len *= 4;
                    }
                    for (a, t) in acc.iter_mut().zip(&tensor) {
                        *a += t;
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![ZERO; dim];
        for p in parts {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
        total
    }

    fn mean(&self, a: &LabelMatrix, b: &LabelMatrix) -> Complex64 {
        // sample a: copies (0, 3) enter as A₃A₀; sample b: copies (1, 2) as (A₁A₂)ᵀ
        let ua = self.summed_tensor(a, 0, 3, false);
        let vb = self.summed_tensor(b, 1, 2, true);
        let dot: Complex64 = ua.iter().zip(&vb).map(|(x, y)| x * y).sum();
        let (ka, kb) = (a.len() as f64, b.len() as f64);
        self.phase * dot / (ka * (ka - 1.0) * kb * (kb - 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::observable::Side;
    use crate::qlinalg::PauliString;

    fn random_labels(k: usize, m: usize, seed: u64) -> LabelMatrix {
        let mut rng = RandomStream::new(Seed(seed));
        let rows: Vec<Vec<u8>> = (0..k)
            .map(|_| (0..m).map(|_| rng.below(6) as u8).collect())
            .collect();
        LabelMatrix::from_rows(&rows).unwrap()
    }

    fn brute_force_ordered(labels: &LabelMatrix, obs: &ObservableSpec) -> Complex64 {
        let compiled = obs.compile();
        let k = labels.len();
        let c = obs.copies;
        let mut idx = vec![0usize; c];
        let mut total = ZERO;
        let mut count = 0.0;
        loop {
            let distinct = (0..c).all(|i| (0..i).all(|j| idx[i] != idx[j]));
            if distinct {
                let rows: Vec<&[u8]> = idx.iter().map(|&i| labels.row(i)).collect();
                total += compiled.eval(&rows);
                count += 1.0;
            }
            let mut pos = 0;
            loop {
                if pos == c {
                    return total / count * obs.prefactor;
                }
                idx[pos] += 1;
                if idx[pos] < k {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    fn sample_observable(c: usize, m: usize, seed: u64) -> ObservableSpec {
        let mut rng = RandomStream::new(Seed(seed));
        let factors = (0..c)
            .map(|_| {
                let l = (0..m).map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.below(4)]).collect();
                PauliString::new(l, 0)
            })
            .collect();
        let all = crate::qlinalg::all_permutations(c);
        let wiring = (0..m).map(|_| all[rng.below(all.len())].clone()).collect();
        ObservableSpec::new(factors, wiring, Side::Left, 1.5).unwrap()
    }

    #[test]
    fn set_partition_counts_and_mobius() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for c in 0..=6 {
            assert_eq!(set_partitions(c).len(), bell[c]);
        }
        // Σ_P μ(P) = 0 for c ≥ 2
        for c in 2..=5 {
            let s: f64 = set_partitions(c).iter().map(|p| mobius(p)).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn histogram_and_direct_paths_agree_with_brute_force() {
        for (c, m, k) in [(2usize, 2usize, 15usize), (3, 1, 12), (4, 2, 9), (4, 1, 20)] {
            let labels = random_labels(k, m, (c * 100 + m) as u64);
            let obs = sample_observable(c, m, (c + m) as u64);
            let compiled = obs.compile();
            let brute = brute_force_ordered(&labels, &obs);
            let hist = histogram_mean(&labels, &compiled) * obs.prefactor;
            let direct = direct_mean(&labels, &compiled, &obs.orderings) * obs.prefactor;
            assert!((hist - brute).norm() < 1e-9 * (1.0 + brute.norm()), "c={c}");
            assert!((direct - brute).norm() < 1e-9 * (1.0 + brute.norm()), "c={c}");
        }
    }

    #[test]
    fn exhaustive_is_invariant_under_reordering() {
        let labels = random_labels(30, 2, 7);
        let obs = sample_observable(2, 2, 8);
        let a = u_statistic(&labels, &obs, &Mode::Exhaustive).unwrap();
        let mut rows: Vec<Vec<u8>> = (0..30).map(|i| labels.row(i).to_vec()).collect();
        rows.reverse();
        rows.swap(3, 17);
        let b = u_statistic(&LabelMatrix::from_rows(&rows).unwrap(), &obs, &Mode::Exhaustive).unwrap();
        assert!((a.value - b.value).norm() < 1e-12);
        assert_eq!(a.num_terms, 435 * 2);
    }

    #[test]
    fn subsampling_is_deterministic_and_thread_independent() {
        let labels = random_labels(40, 2, 9);
        let obs = sample_observable(3, 2, 10);
        let mode = Mode::Subsampled { samples: 10_000, seed: Seed(5) };
        let a = u_statistic(&labels, &obs, &mode).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| u_statistic(&labels, &obs, &mode).unwrap());
        assert_eq!(a.value, b.value);
        assert_eq!(a.num_terms, 60_000);
    }

    #[test]
    fn subset_draws_are_distinct() {
        let mut rng = RandomStream::new(Seed(1));
        for _ in 0..1000 {
            let s = draw_subset(&mut rng, 6, 4);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            assert!(s[3] < 6);
        }
    }

    #[test]
    fn pair_split_matches_direct() {
        let a = random_labels(9, 3, 11);
        let b = random_labels(7, 3, 12);
        let f: Vec<PauliString> = ["XIZ", "ZIX", "XYX", "ZZZ"].iter().map(|s| s.parse().unwrap()).collect();
        let c4 = Permutation::forward_cycle(4);
        for side in [Side::Left, Side::Right] {
            let obs = ObservableSpec::new(
                f.clone(),
                vec![c4.clone(), c4.clone(), Permutation::identity(4)],
                side,
                1.0,
            )
            .unwrap();
            let split = PairSplit::new(&obs).unwrap().mean(&a, &b);
            let direct = two_sample_direct(&a, &b, &obs.compile());
            assert!((split - direct).norm() < 1e-10, "{split} vs {direct}");
        }
    }

    #[test]
    fn not_enough_snapshots() {
        let labels = random_labels(3, 1, 1);
        let obs = sample_observable(4, 1, 2);
        assert!(matches!(
            u_statistic(&labels, &obs, &Mode::Exhaustive),
            Err(OtocError::NotEnoughSnapshots { .. })
        ));
    }
}
