use nalgebra::DMatrix;

use super::permutation::{all_permutations, Permutation};
use crate::error::{out_of_range, OtocError, Result};

/// Inverse of the Gram matrix `G_{π,σ} = d^{f(π∘σ)}` over `S_k`.
#[derive(Clone, Debug)]
pub struct WeingartenMatrix {
    k: usize,
    d: usize,
    perms: Vec<Permutation>,
    entries: Vec<f64>,
}

impl WeingartenMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Row/column labels, lexicographic (identity first).
    pub fn permutations(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.perms.len() + j]
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn index_of(&self, p: &Permutation) -> Option<usize> {
        self.perms.iter().position(|q| q == p)
    }
}

pub fn gram_matrix(perms: &[Permutation], d: usize) -> Result<DMatrix<f64>> {
    let n = perms.len();
    let mut g = DMatrix::zeros(n, n);
    for (i, p) in perms.iter().enumerate() {
        for (j, s) in perms.iter().enumerate() {
            g[(i, j)] = (d as f64).powi(p.compose(s)?.num_cycles() as i32);
        }
    }
    Ok(g)
}

/// `k ≤ 4`, `d ≥ k`.
pub fn weingarten_matrix(k: usize, d: usize) -> Result<WeingartenMatrix> {
    if !(1..=4).contains(&k) {
        return Err(out_of_range("k", k, "1..=4"));
    }
    if d < k {
        return Err(OtocError::Singular(format!(
            "Gram matrix over S_{k} is singular for d = {d} < k"
        )));
    }
    let perms = all_permutations(k);
    let g = gram_matrix(&perms, d)?;
    let inv = g
        .try_inverse()
        .ok_or_else(|| OtocError::Singular(format!("Gram matrix for k={k}, d={d}")))?;
    let n = perms.len();
    let entries = (0..n * n).map(|idx| inv[(idx / n, idx % n)]).collect();
    Ok(WeingartenMatrix {
        k,
        d,
        perms,
        entries,
    })
}

/// `(d−1)!/(d−1+k)!`
pub fn weingarten_row_sum(k: usize, d: usize) -> f64 {
    (0..k).map(|j| 1.0 / (d + j) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k2_closed_form() {
        for d in [2usize, 3, 4, 8] {
            let w = weingarten_matrix(2, d).unwrap();
            let df = d as f64;
            let pre = 1.0 / (df * df - 1.0);
            assert!((w.get(0, 0) - pre).abs() < 1e-14);
            assert!((w.get(1, 1) - pre).abs() < 1e-14);
            assert!((w.get(0, 1) + pre / df).abs() < 1e-14);
            assert!((w.get(1, 0) + pre / df).abs() < 1e-14);
        }
    }

    #[test]
    fn row_sums_closed_form() {
        for k in 2..=4 {
            let w = weingarten_matrix(k, 4).unwrap();
            for j in 0..w.len() {
                let s: f64 = (0..w.len()).map(|i| w.get(i, j)).sum();
                assert!((s - weingarten_row_sum(k, 4)).abs() < 1e-12, "k={k}");
            }
        }
    }

    #[test]
    fn inverse_relation_k3_d8() {
        let w = weingarten_matrix(3, 8).unwrap();
        let g = gram_matrix(w.permutations(), 8).unwrap();
        let n = w.len();
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|m| w.get(i, m) * g[(m, j)]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_unsupported() {
        assert!(matches!(weingarten_matrix(3, 2), Err(OtocError::Singular(_))));
        assert!(weingarten_matrix(5, 8).is_err());
        assert!(weingarten_matrix(0, 8).is_err());
    }
}
