//! Permutations of tensor copies and their operators.
//!
//! `T_π` acts on `k` tensor copies by `T_π|a_1 … a_k⟩ = |a_{π(1)} … a_{π(k)}⟩`.
//! With this action `Tr{T_π A_1⊗…⊗A_k}` is a product over the cycles of `π`
//! of `Tr{A_j A_{π(j)} A_{π²(j)} …}`, and `Tr{T_(1,2) A⊗B} = Tr{AB}`.
//!
//! Composition is read left to right: `π.compose(σ)` applies `π` first and
//! then `σ`, which is the order that makes `T_π·T_σ = T_{π∘σ}` hold.

use std::fmt;

use num_complex::Complex64;

use super::dense::{DenseOperator, ONE, ZERO};
use crate::error::{out_of_range, OtocError, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Self {
            images: (0..k).collect(),
        }
    }

    /// From 0-based images.
    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let k = images.len();
        let mut seen = vec![false; k];
        for &i in &images {
            if i >= k || seen[i] {
                return Err(OtocError::InvalidArgument(format!(
                    "{images:?} is not a permutation of 0..{k}"
                )));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    /// From 1-based one-line notation, e.g. `[2, 1, 3]`.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        if images.contains(&0) {
            return Err(OtocError::InvalidArgument(
                "one-line notation is 1-based".into(),
            ));
        }
        Self::from_images(images.iter().map(|&i| i - 1).collect())
    }

    /// From 1-based cycles; unlisted points are fixed.
    /// `from_cycles(4, &[&[1, 2, 3, 4]])` maps 1→2→3→4→1.
    pub fn from_cycles(k: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..k).collect();
        let mut touched = vec![false; k];
        for cycle in cycles {
            for (pos, &a) in cycle.iter().enumerate() {
                if a == 0 || a > k || touched[a - 1] {
                    return Err(OtocError::InvalidArgument(format!(
                        "bad cycle {cycle:?} for size {k}"
                    )));
                }
                touched[a - 1] = true;
                images[a - 1] = cycle[(pos + 1) % cycle.len()] - 1;
            }
        }
        Ok(Self { images })
    }

    /// The full cycle `j → j+1 mod k`.
    pub fn forward_cycle(k: usize) -> Self {
        Self {
            images: (0..k).map(|j| (j + 1) % k).collect(),
        }
    }

    /// The full cycle `j → j−1 mod k`.
    pub fn backward_cycle(k: usize) -> Self {
        Self {
            images: (0..k).map(|j| (j + k - 1) % k).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    /// 0-based image of 0-based `j`.
    pub fn apply(&self, j: usize) -> usize {
        self.images[j]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.images.len()];
        for (j, &i) in self.images.iter().enumerate() {
            inv[i] = j;
        }
        Self { images: inv }
    }

    /// Apply `self` first, then `other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.size() != other.size() {
            return Err(OtocError::DimensionMismatch(format!(
                "composing permutations of size {} and {}",
                self.size(),
                other.size()
            )));
        }
        Ok(Self {
            images: self.images.iter().map(|&j| other.images[j]).collect(),
        })
    }

    /// 0-based cycles, each starting at its smallest element, ordered by
    /// that element. Fixed points are included.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let k = self.images.len();
        let mut seen = vec![false; k];
        let mut out = Vec::new();
        for start in 0..k {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut j = self.images[start];
            while j != start {
                seen[j] = true;
                cycle.push(j);
                j = self.images[j];
            }
            out.push(cycle);
        }
        out
    }

    /// `f(π)`, the number of cycles including fixed points.
    pub fn num_cycles(&self) -> usize {
        self.cycles().len()
    }

    /// Cycle lengths, descending.
    pub fn cycle_type(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.cycles().iter().map(Vec::len).collect();
        t.sort_unstable_by(|a, b| b.cmp(a));
        t
    }

    pub fn is_derangement(&self) -> bool {
        self.images.iter().enumerate().all(|(j, &i)| i != j)
    }

    pub fn has_odd_cycle(&self) -> bool {
        self.cycles().iter().any(|c| c.len() % 2 == 1)
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(j, &i)| i == j)
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for cycle in self.cycles() {
            let s: Vec<String> = cycle.iter().map(|j| (j + 1).to_string()).collect();
            write!(f, "({})", s.join(","))?;
        }
        Ok(())
    }
}

/// All of `S_k` in lexicographic order of 0-based images.
pub fn all_permutations(k: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(Permutation {
            images: current.clone(),
        });
        // next lexicographic permutation
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            break;
        };
        let j = (i..k).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
    }
    out
}

/// Fixed-point-free permutations of `S_k`, `1 ≤ k ≤ 6`, lexicographic.
pub fn derangements(k: usize) -> Result<Vec<Permutation>> {
    if !(1..=6).contains(&k) {
        return Err(out_of_range("k", k, "1..=6"));
    }
    Ok(all_permutations(k)
        .into_iter()
        .filter(Permutation::is_derangement)
        .collect())
}

/// Dense `T_π` on `local_dim^k` dimensions.
pub fn permutation_operator(perm: &Permutation, local_dim: usize) -> Result<DenseOperator> {
    if local_dim < 2 {
        return Err(out_of_range("local_dim", local_dim, ">= 2"));
    }
    let k = perm.size();
    let dim = local_dim
        .checked_pow(k as u32)
        .filter(|&d| d <= 1 << 14)
        .ok_or_else(|| out_of_range("local_dim^k", format!("{local_dim}^{k}"), "<= 2^14"))?;
    let mut m = DenseOperator::zeros(dim);
    let mut digits = vec![0usize; k];
    for col in 0..dim {
        let mut rest = col;
        for j in (0..k).rev() {
            digits[j] = rest % local_dim;
            rest /= local_dim;
        }
        let row = (0..k).fold(0usize, |acc, j| acc * local_dim + digits[perm.apply(j)]);
        m[(row, col)] = ONE;
    }
    Ok(m)
}

/// `Tr{T_π A_1⊗…⊗A_k}` as a product of per-cycle traces.
pub fn trace_with_permutation(perm: &Permutation, ops: &[&DenseOperator]) -> Result<Complex64> {
    if ops.len() != perm.size() {
        return Err(OtocError::DimensionMismatch(format!(
            "{} operators for a permutation of size {}",
            ops.len(),
            perm.size()
        )));
    }
    if let Some(first) = ops.first() {
        if ops.iter().any(|o| o.dim() != first.dim()) {
            return Err(OtocError::DimensionMismatch(
                "operators differ in dimension".into(),
            ));
        }
    }
    let mut total = ONE;
    for cycle in perm.cycles() {
        let chain: Vec<&DenseOperator> = cycle.iter().map(|&j| ops[j]).collect();
        let value = if chain.len() == 1 {
            chain[0].trace()
        } else {
            let head = DenseOperator::product(&chain[..chain.len() - 1])?;
            head.trace_product(chain[chain.len() - 1])?
        };
        total *= value;
        if total == ZERO {
            break;
        }
    }
    Ok(total)
}
