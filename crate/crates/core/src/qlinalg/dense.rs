//! Dense complex matrices and pure states.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{OtocError, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Rows below this are multiplied on the calling thread.
const PAR_MATMUL_DIM: usize = 64;

/// Square complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    data: Vec<Complex64>,
}

impl fmt::Debug for DenseOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseOperator({}x{})", self.dim, self.dim)?;
        if self.dim <= 8 {
            for r in 0..self.dim {
                let row: Vec<String> = self
                    .row(r)
                    .iter()
                    .map(|z| format!("{:+.4}{:+.4}i", z.re, z.im))
                    .collect();
                writeln!(f, "  [{}]", row.join(", "))?;
            }
        }
        Ok(())
    }
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Build from row-major entries. `data.len()` must be a perfect square.
    pub fn from_row_major(data: Vec<Complex64>) -> Result<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        if dim * dim != data.len() || dim == 0 {
            return Err(OtocError::DimensionMismatch(format!(
                "{} entries do not form a square matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(OtocError::InvalidArgument("non-finite matrix entry".into()));
        }
        Ok(Self { dim, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        Self::from_fn(dim, |r, c| Complex64::new(rows[r][c], 0.0))
    }

    pub fn diagonal(diag: &[Complex64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = z;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    fn check_same_dim(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim != other.dim {
            return Err(OtocError::DimensionMismatch(format!(
                "{what}: {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "matmul")?;
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        let kernel = |(r, out_row): (usize, &mut [Complex64])| {
            let a_row = &self.data[r * n..(r + 1) * n];
            for (k, &a) in a_row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        };
        if n >= PAR_MATMUL_DIM {
            out.par_chunks_mut(n).enumerate().for_each(kernel);
        } else {
            out.chunks_mut(n).enumerate().for_each(kernel);
        }
        Self { dim: n, data: out }
    }

    /// Product of a sequence of equally sized operators, left to right.
    pub fn product(ops: &[&DenseOperator]) -> Result<Self> {
        let first = ops
            .first()
            .ok_or_else(|| OtocError::InvalidArgument("empty product".into()))?;
        let mut acc = (*first).clone();
        for op in &ops[1..] {
            acc = acc.matmul(op)?;
        }
        Ok(acc)
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut result = Self::identity(self.dim);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_unchecked(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_unchecked(&base);
            }
        }
        result
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "add")?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other, "sub")?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// `self·other − other·self`
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.matmul(other)?.sub(&other.matmul(self)?)
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |r, c| self.data[c * n + r].conj())
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_fn(n, |r, c| self.data[c * n + r])
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// `Tr{self·other}` without forming the product.
    pub fn trace_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_dim(other, "trace_product")?;
        let n = self.dim;
        let mut acc = ZERO;
        for r in 0..n {
            for c in 0..n {
                acc += self.data[r * n + c] * other.data[c * n + r];
            }
        }
        Ok(acc)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius distance to `other`.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.frobenius_norm())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim;
        (0..n).all(|r| (r..n).all(|c| (self.data[r * n + c] - self.data[c * n + r].conj()).norm() <= tol))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let p = self.adjoint().mul_unchecked(self);
        p.distance(&Self::identity(self.dim)).map(|e| e <= tol).unwrap_or(false)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (n, m) = (self.dim, other.dim);
        let dim = n * m;
        let mut data = vec![ZERO; dim * dim];
        for r1 in 0..n {
            for c1 in 0..n {
                let a = self.data[r1 * n + c1];
                if a == ZERO {
                    continue;
                }
                for r2 in 0..m {
                    let row = (r1 * m + r2) * dim + c1 * m;
                    for c2 in 0..m {
                        data[row + c2] = a * other.data[r2 * m + c2];
                    }
                }
            }
        }
        Self { dim, data }
    }

    /// Apply to a column vector.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.dim {
            return Err(OtocError::DimensionMismatch(format!(
                "apply: operator {} vs vector {}",
                self.dim,
                v.len()
            )));
        }
        Ok((0..self.dim)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Trace out the last `dim / keep_dim` factor, keeping the leading
    /// factor of dimension `keep_dim`.
    pub fn partial_trace_last(&self, keep_dim: usize) -> Result<Self> {
        if keep_dim == 0 || self.dim % keep_dim != 0 {
            return Err(OtocError::DimensionMismatch(format!(
                "cannot split {} into a leading factor of {}",
                self.dim, keep_dim
            )));
        }
        let rest = self.dim / keep_dim;
        let n = self.dim;
        Ok(Self::from_fn(keep_dim, |r, c| {
            (0..rest).map(|j| self.data[(r * rest + j) * n + c * rest + j]).sum()
        }))
    }

    /// Trace out the leading factor of dimension `self.dim / keep_dim`.
    pub fn partial_trace_first(&self, keep_dim: usize) -> Result<Self> {
        if keep_dim == 0 || self.dim % keep_dim != 0 {
            return Err(OtocError::DimensionMismatch(format!(
                "cannot split {} into a trailing factor of {}",
                self.dim, keep_dim
            )));
        }
        let lead = self.dim / keep_dim;
        let n = self.dim;
        Ok(Self::from_fn(keep_dim, |r, c| {
            (0..lead)
                .map(|j| self.data[(j * keep_dim + r) * n + j * keep_dim + c])
                .sum()
        }))
    }

    /// Reduced operator on the listed qubits (0-based, kept in ascending
    /// order); `self` must act on `num_qubits` qubits.
    pub fn reduce_to_qubits(&self, num_qubits: usize, keep: &[usize]) -> Result<Self> {
        if self.dim != 1 << num_qubits {
            return Err(OtocError::DimensionMismatch(format!(
                "dimension {} is not 2^{}",
                self.dim, num_qubits
            )));
        }
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        if keep.iter().any(|&q| q >= num_qubits) {
            return Err(OtocError::InvalidArgument("qubit index out of range".into()));
        }
        let traced: Vec<usize> = (0..num_qubits).filter(|q| !keep.contains(q)).collect();
        let shift = |q: usize| num_qubits - 1 - q;
        let embed = |kept_bits: usize, traced_bits: usize| -> usize {
            let mut idx = 0usize;
            for (i, &q) in keep.iter().enumerate() {
                if (kept_bits >> (keep.len() - 1 - i)) & 1 == 1 {
                    idx |= 1 << shift(q);
                }
            }
            for (i, &q) in traced.iter().enumerate() {
                if (traced_bits >> (traced.len() - 1 - i)) & 1 == 1 {
                    idx |= 1 << shift(q);
                }
            }
            idx
        };
        let kd = 1usize << keep.len();
        let td = 1usize << traced.len();
        let n = self.dim;
        Ok(Self::from_fn(kd, |r, c| {
            (0..td)
                .map(|j| self.data[embed(r, j) * n + embed(c, j)])
                .sum()
        }))
    }

    pub fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<Complex64>) -> Self {
        let dim = m.nrows();
        Self::from_fn(dim, |r, c| m[(r, c)])
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_hermitian(1e-8 * (1.0 + self.frobenius_norm())) {
            return Err(OtocError::InvalidArgument(
                "eigenvalues requested for a non-Hermitian operator".into(),
            ));
        }
        let eig = nalgebra::linalg::SymmetricEigen::new(self.to_nalgebra());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }
}

impl Index<(usize, usize)> for DenseOperator {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for DenseOperator {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

/// Kronecker product of two operators.
pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kron(b)
}

/// Kronecker product of a non-empty list, first factor most significant.
pub fn kron_all(ops: &[&DenseOperator]) -> DenseOperator {
    ops.iter()
        .fold(DenseOperator::identity(1), |acc, op| acc.kron(op))
}

/// Normalized pure state of `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(OtocError::DimensionMismatch(format!(
                "{len} amplitudes is not 2^n with n >= 1"
            )));
        }
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(OtocError::InvalidState(format!(
                "squared amplitudes sum to {norm}"
            )));
        }
        Ok(Self {
            num_qubits: len.trailing_zeros() as usize,
            amplitudes,
        })
    }

    /// Rescale arbitrary non-zero amplitudes to unit norm.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(OtocError::InvalidState("zero or non-finite vector".into()));
        }
        for z in &mut amplitudes {
            *z /= norm;
        }
        Self::new(amplitudes)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if num_qubits == 0 || index >= dim {
            return Err(OtocError::InvalidArgument(format!(
                "basis state {index} on {num_qubits} qubits"
            )));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes: amps,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `⟨ψ|A|ψ⟩`
    pub fn expectation(&self, op: &DenseOperator) -> Result<Complex64> {
        let av = op.apply(&self.amplitudes)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&av)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    pub fn evolve(&self, op: &DenseOperator) -> Result<Self> {
        Ok(Self {
            num_qubits: self.num_qubits,
            amplitudes: op.apply(&self.amplitudes)?,
        })
    }

    pub fn density_matrix(&self) -> DenseOperator {
        let a = &self.amplitudes;
        DenseOperator::from_fn(a.len(), |r, c| a[r] * a[c].conj())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_op(dim: usize, seed: u64) -> DenseOperator {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        DenseOperator::from_fn(dim, |_, _| c(next(), next()))
    }

    #[test]
    fn kron_identities() {
        let i2 = DenseOperator::identity(2);
        assert_eq!(kron(&i2, &i2), DenseOperator::identity(4));

        let z = DenseOperator::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let zz = kron(&z, &z);
        let expect = DenseOperator::diagonal(&[ONE, -ONE, -ONE, ONE]);
        assert_eq!(zz, expect);
    }

    #[test]
    fn kron_trace_factorizes() {
        let a = random_op(2, 1);
        let b = random_op(2, 2);
        let lhs = kron(&a, &b).trace();
        assert!((lhs - a.trace() * b.trace()).norm() < 1e-12);
    }

    #[test]
    fn matmul_matches_naive_and_parallel_path() {
        for &n in &[3usize, 70] {
            let a = random_op(n, 3);
            let b = random_op(n, 4);
            let p = a.matmul(&b).unwrap();
            for r in [0, n / 2, n - 1] {
                for col in [0, n - 1] {
                    let naive: Complex64 = (0..n).map(|k| a[(r, k)] * b[(k, col)]).sum();
                    assert!((p[(r, col)] - naive).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let a = DenseOperator::identity(2);
        let b = DenseOperator::identity(4);
        assert!(matches!(a.matmul(&b), Err(OtocError::DimensionMismatch(_))));
    }

    #[test]
    fn pow_matches_repeated_product() {
        let a = random_op(4, 5);
        let p3 = a.matmul(&a).unwrap().matmul(&a).unwrap();
        assert!(a.pow(3).distance(&p3).unwrap() < 1e-12);
        assert_eq!(a.pow(0), DenseOperator::identity(4));
    }

    #[test]
    fn partial_traces_of_product_operator() {
        let a = random_op(2, 6);
        let b = random_op(4, 7);
        let ab = kron(&a, &b);
        let ta = ab.partial_trace_last(2).unwrap();
        assert!(ta.distance(&a.scale(b.trace())).unwrap() < 1e-12);
        let tb = ab.partial_trace_first(4).unwrap();
        assert!(tb.distance(&b.scale(a.trace())).unwrap() < 1e-12);
    }

    #[test]
    fn reduce_to_qubits_picks_the_right_factor() {
        let a = random_op(2, 8);
        let b = random_op(2, 9);
        let cc = random_op(2, 10);
        let abc = kron_all(&[&a, &b, &cc]);
        let mid = abc.reduce_to_qubits(3, &[1]).unwrap();
        assert!(mid.distance(&b.scale(a.trace() * cc.trace())).unwrap() < 1e-12);
        let outer = abc.reduce_to_qubits(3, &[2, 0]).unwrap();
        assert!(outer.distance(&kron(&a, &cc).scale(b.trace())).unwrap() < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_of_pauli_x() {
        let x = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let ev = x.hermitian_eigenvalues().unwrap();
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        assert!(random_op(3, 1).hermitian_eigenvalues().is_err());
    }

    #[test]
    fn state_vector_validation() {
        assert!(StateVector::new(vec![ONE, ONE]).is_err());
        let plus = StateVector::normalized(vec![ONE, ONE]).unwrap();
        assert_eq!(plus.num_qubits(), 1);
        let x = DenseOperator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert!((plus.expectation(&x).unwrap() - ONE).norm() < 1e-12);
        let rho = plus.density_matrix();
        assert!((rho.trace() - ONE).norm() < 1e-12);
        assert!(rho.matmul(&rho).unwrap().distance(&rho).unwrap() < 1e-12);
    }
}
