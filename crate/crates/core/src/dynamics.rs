//! Mixed-field Ising chain, its exact spectrum, and the states the
//! measurement protocols start from.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, OtocError, Result};
use crate::qlinalg::{DenseOperator, PauliString, StateVector};

pub const MAX_QUBITS: usize = 12;

/// `H = −(J Σ Z_i Z_{i+1} + hx Σ X_i + hz Σ Z_i) / E0` on an open chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingParams {
    pub j: f64,
    pub hx: f64,
    pub hz: f64,
    pub e0: f64,
}

impl IsingParams {
    /// `E0 = sqrt(4J² + 2hx² + 2hz²)`.
    pub fn new(j: f64, hx: f64, hz: f64) -> Self {
        Self {
            j,
            hx,
            hz,
            e0: (4.0 * j * j + 2.0 * hx * hx + 2.0 * hz * hz).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > 0.0 && self.e0.is_finite()) {
            return Err(out_of_range("e0", self.e0, "> 0"));
        }
        if ![self.j, self.hx, self.hz].iter().all(|v| v.is_finite()) {
            return Err(OtocError::InvalidArgument("non-finite Ising parameter".into()));
        }
        Ok(())
    }
}

impl Default for IsingParams {
    fn default() -> Self {
        Self::new(1.0, 1.05, 0.5)
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if !(1..=MAX_QUBITS).contains(&n) {
        return Err(out_of_range("n", n, "1..=12"));
    }
    Ok(())
}

fn ising_real(n: usize, params: &IsingParams) -> DMatrix<f64> {
    let dim = 1usize << n;
    let bit = |s: usize, q: usize| (s >> (n - 1 - q)) & 1;
    let z = |s: usize, q: usize| if bit(s, q) == 0 { 1.0 } else { -1.0 };
    let scale = -1.0 / params.e0;
    let mut h = DMatrix::zeros(dim, dim);
    for s in 0..dim {
        let zz: f64 = (0..n - 1).map(|q| z(s, q) * z(s, q + 1)).sum();
        let zsum: f64 = (0..n).map(|q| z(s, q)).sum();
        h[(s, s)] = scale * (params.j * zz + params.hz * zsum);
        for q in 0..n {
            h[(s ^ (1 << (n - 1 - q)), s)] = scale * params.hx;
        }
    }
    h
}

/// Dense Hamiltonian, `1 ≤ n ≤ 12`.
pub fn build_ising_hamiltonian(n: usize, params: &IsingParams) -> Result<DenseOperator> {
    check_qubits(n)?;
    params.validate()?;
    let h = ising_real(n, params);
    Ok(DenseOperator::from_fn(1 << n, |r, c| Complex64::new(h[(r, c)], 0.0)))
}

/// Eigendecomposition of the (real symmetric) Ising Hamiltonian.
#[derive(Clone, Debug)]
pub struct HamiltonianSpectrum {
    num_qubits: usize,
    params: IsingParams,
    eigenvalues: Vec<f64>,
    // Column m is the eigenvector of eigenvalues[m]; row-major, real.
    eigenvectors: Vec<f64>,
}

impl HamiltonianSpectrum {
    pub fn new(n: usize, params: IsingParams) -> Result<Self> {
        check_qubits(n)?;
        params.validate()?;
        let dim = 1usize << n;
        let eig = SymmetricEigen::new(ising_real(n, &params));
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = order.iter().map(|&m| eig.eigenvalues[m]).collect();
        let mut eigenvectors = vec![0.0; dim * dim];
        for r in 0..dim {
            for (c, &m) in order.iter().enumerate() {
                eigenvectors[r * dim + c] = eig.eigenvectors[(r, m)];
            }
        }
        Ok(Self {
            num_qubits: n,
            params,
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn params(&self) -> &IsingParams {
        &self.params
    }

    /// Ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> DenseOperator {
        let d = self.dim();
        DenseOperator::from_fn(d, |r, c| Complex64::new(self.eigenvectors[r * d + c], 0.0))
    }

    /// `V·f(Λ)·Vᵀ`
    fn spectral(&self, f: impl Fn(f64) -> Complex64) -> DenseOperator {
        let d = self.dim();
        let weights: Vec<Complex64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let left = DenseOperator::from_fn(d, |r, m| weights[m] * self.eigenvectors[r * d + m]);
        let right_t = DenseOperator::from_fn(d, |m, c| {
            Complex64::new(self.eigenvectors[c * d + m], 0.0)
        });
        left.mul_unchecked(&right_t)
    }

    pub fn reconstruct(&self) -> DenseOperator {
        self.spectral(|l| Complex64::new(l, 0.0))
    }
}

/// `U(t) = e^{−iHt}`
#[derive(Clone, Debug)]
pub struct EvolutionOperator {
    pub time: f64,
    pub matrix: DenseOperator,
}

impl EvolutionOperator {
    pub fn num_qubits(&self) -> usize {
        self.matrix.dim().trailing_zeros() as usize
    }
}

pub fn evolution_operator(spec: &HamiltonianSpectrum, t: f64) -> EvolutionOperator {
    EvolutionOperator {
        time: t,
        matrix: spec.spectral(|l| Complex64::from_polar(1.0, -l * t)),
    }
}

/// `W(t) = U†WU`.
pub fn heisenberg_operator(w: &PauliString, u: &EvolutionOperator) -> Result<DenseOperator> {
    let wu = w.left_mul(&u.matrix)?;
    Ok(u.matrix.adjoint().mul_unchecked(&wu))
}

fn conjugate_by(u: &DenseOperator, rho: &DenseOperator) -> DenseOperator {
    u.mul_unchecked(rho).mul_unchecked(&u.adjoint())
}

/// `ρ_in = I/2^{n−1} ⊗ |0⟩⟨0|`, last qubit pinned.
pub fn mixed_protocol_input(n: usize) -> Result<DenseOperator> {
    if !(2..=MAX_QUBITS).contains(&n) {
        return Err(out_of_range("n", n, "2..=12"));
    }
    let d = 1usize << n;
    let w = 1.0 / (d / 2) as f64;
    let diag: Vec<Complex64> = (0..d)
        .map(|s| Complex64::new(if s & 1 == 0 { w } else { 0.0 }, 0.0))
        .collect();
    Ok(DenseOperator::diagonal(&diag))
}

/// `ρ_V = U ρ_in U†`.
pub fn prepare_mixed_protocol_state(
    n: usize,
    spec: &HamiltonianSpectrum,
    t: f64,
) -> Result<DenseOperator> {
    check_spec(n, spec)?;
    let rho_in = mixed_protocol_input(n)?;
    Ok(conjugate_by(&evolution_operator(spec, t).matrix, &rho_in))
}

/// Equal-weight pure-state decomposition of `ρ_V`: `U|x,0⟩` for every
/// bitstring `x` of the first `n−1` qubits.
pub fn mixed_protocol_ensemble(u: &EvolutionOperator) -> Result<Vec<StateVector>> {
    let n = u.num_qubits();
    if n < 2 {
        return Err(out_of_range("n", n, ">= 2"));
    }
    let d = 1usize << n;
    (0..d / 2)
        .map(|x| column(&u.matrix, 2 * x))
        .collect()
}

fn column(u: &DenseOperator, c: usize) -> Result<StateVector> {
    StateVector::normalized((0..u.dim()).map(|r| u[(r, c)]).collect())
}

/// `(U⊗I)|Φ⟩` on `2n` qubits, system first, with amplitude
/// `U[s,a]/√d` at index `s·d + a`.
pub fn bell_dual_vector(u: &EvolutionOperator) -> Result<StateVector> {
    let d = u.matrix.dim();
    let norm = 1.0 / (d as f64).sqrt();
    let mut amps = Vec::with_capacity(d * d);
    for s in 0..d {
        for a in 0..d {
            amps.push(u.matrix[(s, a)] * norm);
        }
    }
    StateVector::new(amps)
}

/// Dense `ρ_H` on `2n ≤ 12` qubits.
pub fn prepare_bell_dual_state(
    n: usize,
    spec: &HamiltonianSpectrum,
    t: f64,
) -> Result<DenseOperator> {
    check_spec(n, spec)?;
    if 2 * n > MAX_QUBITS {
        return Err(out_of_range("2n", 2 * n, "<= 12 for the dense form"));
    }
    Ok(bell_dual_vector(&evolution_operator(spec, t))?.density_matrix())
}

/// Equal-weight pure-state decomposition of the single-Bell state on `n+1`
/// qubits: system qubit `bell_qubit` (1-based) shares a Bell pair with the
/// trailing ancilla, the other system qubits run over basis states, then
/// `U ⊗ I` is applied.
pub fn single_bell_ensemble(u: &EvolutionOperator, bell_qubit: usize) -> Result<Vec<StateVector>> {
    let n = u.num_qubits();
    if bell_qubit != 1 && bell_qubit != n {
        return Err(OtocError::InvalidArgument(format!(
            "bell_qubit must be 1 or {n}, got {bell_qubit}"
        )));
    }
    let d = 1usize << n;
    let shift = n - bell_qubit;
    let low_mask = (1usize << shift) - 1;
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    (0..d / 2)
        .map(|x| {
            // insert a zero bit at position `shift`
            let base = ((x & !low_mask) << 1) | (x & low_mask);
            let idx = [base, base | (1 << shift)];
            let mut amps = vec![Complex64::new(0.0, 0.0); 2 * d];
            for s in 0..d {
                for (a, &col) in idx.iter().enumerate() {
                    amps[2 * s + a] = u.matrix[(s, col)] * norm;
                }
            }
            StateVector::new(amps)
        })
        .collect()
}

/// Dense single-Bell state on `n+1` qubits.
pub fn prepare_single_bell_state(
    n: usize,
    spec: &HamiltonianSpectrum,
    t: f64,
    bell_qubit: usize,
) -> Result<DenseOperator> {
    check_spec(n, spec)?;
    if n + 1 > MAX_QUBITS {
        return Err(out_of_range("n + 1", n + 1, "<= 12 for the dense form"));
    }
    let members = single_bell_ensemble(&evolution_operator(spec, t), bell_qubit)?;
    Ok(ensemble_density(&members))
}

/// Uniform mixture of the given pure states.
pub fn ensemble_density(members: &[StateVector]) -> DenseOperator {
    let dim = members[0].dim();
    let w = 1.0 / members.len() as f64;
    let mut rho = DenseOperator::zeros(dim);
    for m in members {
        let a = m.amplitudes();
        for r in 0..dim {
            for c in 0..dim {
                rho[(r, c)] += a[r] * a[c].conj() * w;
            }
        }
    }
    rho
}

fn check_spec(n: usize, spec: &HamiltonianSpectrum) -> Result<()> {
    if spec.num_qubits() != n {
        return Err(OtocError::DimensionMismatch(format!(
            "spectrum is for {} qubits, requested {n}",
            spec.num_qubits()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qlinalg::{kron, kron_all, Pauli};

    fn pauli1(p: Pauli) -> DenseOperator {
        PauliString::new(vec![p], 0).matrix()
    }

    /// Term-by-term assembly from Kronecker products.
    fn oracle_hamiltonian(n: usize, params: &IsingParams) -> DenseOperator {
        let id = DenseOperator::identity(2);
        let embed = |ops: &[(usize, Pauli)]| {
            let factors: Vec<DenseOperator> = (0..n)
                .map(|q| {
                    ops.iter()
                        .find(|(p, _)| *p == q)
                        .map(|(_, l)| pauli1(*l))
                        .unwrap_or_else(|| id.clone())
                })
                .collect();
            let refs: Vec<&DenseOperator> = factors.iter().collect();
            kron_all(&refs)
        };
        let d = 1 << n;
        let mut h = DenseOperator::zeros(d);
        for q in 0..n - 1 {
            h = h.add(&embed(&[(q, Pauli::Z), (q + 1, Pauli::Z)]).scale_real(params.j)).unwrap();
        }
        for q in 0..n {
            h = h.add(&embed(&[(q, Pauli::X)]).scale_real(params.hx)).unwrap();
            h = h.add(&embed(&[(q, Pauli::Z)]).scale_real(params.hz)).unwrap();
        }
        h.scale_real(-1.0 / params.e0)
    }

    #[test]
    fn default_normalization() {
        let p = IsingParams::default();
        let e0 = (4.0f64 + 2.0 * 1.05 * 1.05 + 2.0 * 0.25).sqrt();
        assert!((p.e0 - e0).abs() < 1e-15);
    }

    #[test]
    fn single_qubit_hamiltonian() {
        let p = IsingParams::default();
        let h = build_ising_hamiltonian(1, &p).unwrap();
        let expect = pauli1(Pauli::X)
            .scale_real(1.05)
            .add(&pauli1(Pauli::Z).scale_real(0.5))
            .unwrap()
            .scale_real(-1.0 / p.e0);
        assert!(h.distance(&expect).unwrap() < 1e-14);
    }

    #[test]
    fn matches_term_by_term_assembly() {
        let p = IsingParams::default();
        for n in 2..=4 {
            let h = build_ising_hamiltonian(n, &p).unwrap();
            assert!(h.distance(&oracle_hamiltonian(n, &p)).unwrap() < 1e-13);
            assert!(h.is_hermitian(1e-12));
        }
        assert!(build_ising_hamiltonian(0, &p).is_err());
        assert!(build_ising_hamiltonian(13, &p).is_err());
    }

    #[test]
    fn spectrum_reconstructs() {
        let p = IsingParams::default();
        for n in [3usize, 6] {
            let spec = HamiltonianSpectrum::new(n, p).unwrap();
            let h = build_ising_hamiltonian(n, &p).unwrap();
            assert!(spec.reconstruct().distance(&h).unwrap() < 1e-9);
            assert!(spec.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn evolution_group_property() {
        let spec = HamiltonianSpectrum::new(3, IsingParams::default()).unwrap();
        let id = DenseOperator::identity(8);
        assert!(evolution_operator(&spec, 0.0).matrix.distance(&id).unwrap() < 1e-12);
        let (t1, t2) = (0.37, 1.91);
        let u1 = evolution_operator(&spec, t1).matrix;
        let u2 = evolution_operator(&spec, t2).matrix;
        let u12 = evolution_operator(&spec, t1 + t2).matrix;
        assert!(u1.matmul(&u2).unwrap().distance(&u12).unwrap() < 1e-9);
        assert!(u1.is_unitary(1e-9));
    }

    #[test]
    fn heisenberg_picture() {
        let spec = HamiltonianSpectrum::new(3, IsingParams::default()).unwrap();
        let w: PauliString = "ZII".parse().unwrap();
        let w0 = heisenberg_operator(&w, &evolution_operator(&spec, 0.0)).unwrap();
        assert!(w0.distance(&w.matrix()).unwrap() < 1e-12);
        let wt = heisenberg_operator(&w, &evolution_operator(&spec, 2.3)).unwrap();
        assert!(wt.matmul(&wt).unwrap().distance(&DenseOperator::identity(8)).unwrap() < 1e-9);
        assert!(wt.trace().norm() < 1e-9);
        assert!(wt.is_hermitian(1e-9));
    }

    #[test]
    fn mixed_protocol_state_properties() {
        let spec = HamiltonianSpectrum::new(3, IsingParams::default()).unwrap();
        let rho0 = prepare_mixed_protocol_state(3, &spec, 0.0).unwrap();
        assert!(rho0.distance(&mixed_protocol_input(3).unwrap()).unwrap() < 1e-12);
        let rho = prepare_mixed_protocol_state(3, &spec, 1.7).unwrap();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        let sq = rho.matmul(&rho).unwrap();
        assert!(sq.distance(&rho.scale_real(2.0 / 8.0)).unwrap() < 1e-9);
        let ev = rho.hermitian_eigenvalues().unwrap();
        assert!(ev.iter().all(|&l| l > -1e-10));
        assert_eq!(ev.iter().filter(|&&l| l > 1e-6).count(), 4);
        let members = mixed_protocol_ensemble(&evolution_operator(&spec, 1.7)).unwrap();
        assert!(ensemble_density(&members).distance(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn bell_dual_state_properties() {
        let spec1 = HamiltonianSpectrum::new(1, IsingParams::default()).unwrap();
        let rho = prepare_bell_dual_state(1, &spec1, 0.0).unwrap();
        let h = 0.5;
        let expect = DenseOperator::from_real_rows(&[
            &[h, 0.0, 0.0, h],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[h, 0.0, 0.0, h],
        ]);
        assert!(rho.distance(&expect).unwrap() < 1e-12);

        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let rho = prepare_bell_dual_state(2, &spec, 2.9).unwrap();
        assert!((rho.matmul(&rho).unwrap().trace().re - 1.0).abs() < 1e-10);
        let reduced = rho.partial_trace_last(4).unwrap();
        assert!(reduced.distance(&DenseOperator::identity(4).scale_real(0.25)).unwrap() < 1e-10);
        let reduced = rho.partial_trace_first(4).unwrap();
        assert!(reduced.distance(&DenseOperator::identity(4).scale_real(0.25)).unwrap() < 1e-10);
    }

    #[test]
    fn single_bell_state_properties() {
        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let rho = prepare_single_bell_state(2, &spec, 0.0, 2).unwrap();
        let pair = rho.reduce_to_qubits(3, &[1, 2]).unwrap();
        let bell = StateVector::normalized(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap()
        .density_matrix();
        assert!(pair.distance(&bell).unwrap() < 1e-12);
        let first = rho.reduce_to_qubits(3, &[0]).unwrap();
        assert!(first.distance(&DenseOperator::identity(2).scale_real(0.5)).unwrap() < 1e-12);

        let rho1 = prepare_single_bell_state(2, &spec, 0.0, 1).unwrap();
        let pair = rho1.reduce_to_qubits(3, &[0, 2]).unwrap();
        assert!(pair.distance(&bell).unwrap() < 1e-12);

        for (n, t) in [(2usize, 1.3), (3, 4.1)] {
            let spec = HamiltonianSpectrum::new(n, IsingParams::default()).unwrap();
            let rho = prepare_single_bell_state(n, &spec, t, n).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            let purity = rho.matmul(&rho).unwrap().trace().re;
            assert!((purity - 1.0 / (1 << (n - 1)) as f64).abs() < 1e-10);
        }
        assert!(prepare_single_bell_state(3, &HamiltonianSpectrum::new(3, IsingParams::default()).unwrap(), 0.0, 2).is_err());
    }

    #[test]
    fn ancilla_is_last_factor() {
        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let rho = prepare_single_bell_state(2, &spec, 0.0, 2).unwrap();
        // |ψ⟩ = Σ_x |x⟩ ⊗ (|00⟩+|11⟩)/√2 over qubit 1, so Z₂Z_a has value 1.
        let zz = kron(&DenseOperator::identity(2), &PauliString::new(vec![Pauli::Z, Pauli::Z], 0).matrix());
        assert!((rho.trace_product(&zz).unwrap().re - 1.0).abs() < 1e-12);
    }
}
