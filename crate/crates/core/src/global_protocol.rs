//! Global random-unitary protocol for `C_4` and `C_8`, plus the Haar-moment
//! identities behind it.

use std::io::Write;

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolution_operator, heisenberg_operator, HamiltonianSpectrum, IsingParams};
use crate::error::{out_of_range, OtocError, Result};
use crate::qlinalg::{
    derangements, haar_unitary, trace_with_permutation, weingarten_matrix, DenseOperator,
    PauliString, StateVector,
};
use crate::rng::{RandomStream, Seed};

/// Largest dimension sampled densely.
pub const MAX_GLOBAL_DIM: usize = 256;

/// How each expectation `⟨U†AU⟩` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shots {
    Exact,
    Finite(u64),
}

impl Serialize for Shots {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shots::Exact => s.serialize_str("exact"),
            Shots::Finite(n) => s.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for Shots {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Label(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(0) => Err(serde::de::Error::custom("shots must be positive")),
            Raw::Count(n) => Ok(Shots::Finite(n)),
            Raw::Label(s) if s == "exact" => Ok(Shots::Exact),
            Raw::Label(s) => Err(serde::de::Error::custom(format!(
                "shots must be a positive integer or \"exact\", got {s:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalRunConfig {
    pub n_qubits: usize,
    pub t: f64,
    pub w: PauliString,
    pub v: PauliString,
    pub num_unitaries: usize,
    pub shots: Shots,
    pub probe_state: StateVector,
    pub params: IsingParams,
    pub seed: Seed,
}

impl GlobalRunConfig {
    /// Exact expectations and the probe `|0…0⟩`.
    pub fn new(n_qubits: usize, t: f64, w: PauliString, v: PauliString, num_unitaries: usize, seed: Seed) -> Result<Self> {
        Ok(Self {
            n_qubits,
            t,
            w,
            v,
            num_unitaries,
            shots: Shots::Exact,
            probe_state: StateVector::basis(n_qubits, 0)?,
            params: IsingParams::default(),
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let d = 1usize.checked_shl(self.n_qubits as u32).unwrap_or(usize::MAX);
        if self.n_qubits == 0 || d > MAX_GLOBAL_DIM {
            return Err(out_of_range("n_qubits", self.n_qubits, "1..=8"));
        }
        if self.num_unitaries == 0 {
            return Err(out_of_range("num_unitaries", 0, ">= 1"));
        }
        if self.w.num_qubits() != self.n_qubits || self.v.num_qubits() != self.n_qubits {
            return Err(OtocError::DimensionMismatch("W and V must act on n_qubits".into()));
        }
        if !self.w.is_hermitian() || !self.v.is_hermitian() {
            return Err(OtocError::InvalidArgument("W and V must be Hermitian".into()));
        }
        if self.probe_state.dim() != d {
            return Err(OtocError::DimensionMismatch("probe state dimension".into()));
        }
        if !self.t.is_finite() {
            return Err(OtocError::InvalidArgument("t must be finite".into()));
        }
        self.params.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitaryRecord {
    pub index: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalRunResult {
    pub c4_estimate: f64,
    pub c8_estimate: f64,
    pub c4_se: f64,
    pub c8_se: f64,
    pub per_unitary_records: Vec<UnitaryRecord>,
}

fn shot_average(exact: f64, shots: Shots, rng: &mut RandomStream) -> Result<f64> {
    match shots {
        Shots::Exact => Ok(exact),
        Shots::Finite(n) => {
            let p = ((1.0 + exact) / 2.0).clamp(0.0, 1.0);
            let b = Binomial::new(n, p).map_err(|e| OtocError::InvalidArgument(e.to_string()))?;
            let ups = b.sample(rng) as f64;
            Ok(2.0 * ups / n as f64 - 1.0)
        }
    }
}

/// `C_4 = (d+1)·mean(xy)` and
/// `C_8 = ½(d+1)(d+2)(d+3)·mean(x²y²) − dC_4² − ½(d+4)`, with
/// `x = ⟨U†W(t)U⟩`, `y = ⟨U†V†W(t)VU⟩` over Haar-random `U`.
pub fn run_global_protocol(cfg: &GlobalRunConfig) -> Result<GlobalRunResult> {
    cfg.validate()?;
    let spec = HamiltonianSpectrum::new(cfg.n_qubits, cfg.params)?;
    let evo = evolution_operator(&spec, cfg.t);
    let wt = heisenberg_operator(&cfg.w, &evo)?;
    let yop = cfg.v.adjoint().left_mul(&cfg.v.right_mul(&wt)?)?;
    let d = spec.dim();
    let base = RandomStream::new(cfg.seed);

    let records = (0..cfg.num_unitaries)
        .into_par_iter()
        .map(|i| -> Result<UnitaryRecord> {
            let mut rng = base.substream(i as u64);
            let u = haar_unitary(d, &mut rng)?;
            let psi = cfg.probe_state.evolve(&u)?;
            let x = shot_average(psi.expectation(&wt)?.re, cfg.shots, &mut rng)?;
            let y = shot_average(psi.expectation(&yop)?.re, cfg.shots, &mut rng)?;
            Ok(UnitaryRecord { index: i, x, y })
        })
        .collect::<Result<Vec<_>>>()?;

    let m = records.len() as f64;
    let df = d as f64;
    let a4 = df + 1.0;
    let a8 = 0.5 * (df + 1.0) * (df + 2.0) * (df + 3.0);
    let p: Vec<f64> = records.iter().map(|r| r.x * r.y).collect();
    let mean_p = p.iter().sum::<f64>() / m;
    let mean_q = p.iter().map(|v| v * v).sum::<f64>() / m;
    let c4 = a4 * mean_p;
    let c8 = a8 * mean_q - df * c4 * c4 - 0.5 * (df + 4.0);

    // delta-method standard errors
    let (c4_se, c8_se) = if records.len() > 1 {
        let var_p = p.iter().map(|v| (v - mean_p).powi(2)).sum::<f64>() / (m - 1.0);
        let infl: Vec<f64> = p.iter().map(|v| a8 * v * v - 2.0 * df * c4 * a4 * v).collect();
        let mi = infl.iter().sum::<f64>() / m;
        let var_i = infl.iter().map(|v| (v - mi).powi(2)).sum::<f64>() / (m - 1.0);
        (a4 * (var_p / m).sqrt(), (var_i / m).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };

    Ok(GlobalRunResult {
        c4_estimate: c4,
        c8_estimate: c8,
        c4_se,
        c8_se,
        per_unitary_records: records,
    })
}

/// Per-unitary `(x_U, y_U)` as CSV with columns `index,x,y`.
pub fn write_records_csv<W: Write>(records: &[UnitaryRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fact2Report {
    pub k: usize,
    pub d: usize,
    pub lhs: Complex64,
    pub rhs_weingarten: Complex64,
    pub rhs_montecarlo: Complex64,
    pub rhs_montecarlo_se: f64,
    pub samples: usize,
}

fn rising_factorial_ratio(d: usize, k: usize) -> f64 {
    // (d-1+k)!/(d-1)!
    (0..k).map(|i| (d + i) as f64).product()
}

fn check_traceless(ops: &[DenseOperator], d: usize) -> Result<()> {
    for (i, a) in ops.iter().enumerate() {
        if a.dim() != d {
            return Err(OtocError::DimensionMismatch(format!("operator {i} has dimension {}", a.dim())));
        }
        let scale = a.frobenius_norm().max(1.0);
        if a.trace().norm() > 1e-10 * scale {
            return Err(OtocError::InvalidArgument(format!(
                "operator {i} is not traceless (|Tr| = {:.3e})",
                a.trace().norm()
            )));
        }
    }
    Ok(())
}

/// Derangement sum against the exact Weingarten moment and a Monte Carlo
/// average over `samples` Haar unitaries (probe `|0⟩`).
pub fn verify_fact2(k: usize, ops: &[DenseOperator], samples: usize, seed: Seed) -> Result<Fact2Report> {
    if !(1..=4).contains(&k) {
        return Err(out_of_range("k", k, "1..=4"));
    }
    if ops.len() != k {
        return Err(OtocError::InvalidArgument(format!("expected {k} operators, got {}", ops.len())));
    }
    let d = ops[0].dim();
    check_traceless(ops, d)?;
    let refs: Vec<&DenseOperator> = ops.iter().collect();
    let factor = rising_factorial_ratio(d, k);

    let mut lhs = Complex64::new(0.0, 0.0);
    for s in derangements(k)? {
        lhs += trace_with_permutation(&s, &refs)?;
    }

    let wg = weingarten_matrix(k, d)?;
    let rho0 = DenseOperator::from_fn(d, |r, c| {
        if r == 0 && c == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }
    });
    let probe: Vec<&DenseOperator> = vec![&rho0; k];
    let perms = wg.permutations();
    let mut probe_traces = Vec::with_capacity(perms.len());
    let mut op_traces = Vec::with_capacity(perms.len());
    for p in perms {
        probe_traces.push(trace_with_permutation(p, &probe)?);
        op_traces.push(trace_with_permutation(p, &refs)?);
    }
    let mut moment = Complex64::new(0.0, 0.0);
    for i in 0..perms.len() {
        for j in 0..perms.len() {
            moment += probe_traces[i] * op_traces[j] * wg.get(i, j);
        }
    }
    let rhs_weingarten = moment * factor;

    let (rhs_montecarlo, rhs_montecarlo_se) = if samples == 0 {
        (Complex64::new(f64::NAN, f64::NAN), f64::NAN)
    } else {
        let base = RandomStream::new(seed);
        let vals = (0..samples)
            .into_par_iter()
            .map(|i| -> Result<Complex64> {
                let u = haar_unitary(d, &mut base.substream(i as u64))?;
                // U|0⟩ is the first column of U
                let col: Vec<Complex64> = (0..d).map(|r| u[(r, 0)]).collect();
                let mut prod = Complex64::new(1.0, 0.0);
                for a in ops {
                    let av = a.apply(&col)?;
                    let e: Complex64 = col.iter().zip(&av).map(|(c, x)| c.conj() * x).sum();
                    prod *= e;
                }
                Ok(prod)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<Complex64>() / n;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
        } else {
            f64::NAN
        };
        (mean * factor, factor * (var / n).sqrt())
    };

    Ok(Fact2Report {
        k,
        d,
        lhs,
        rhs_weingarten,
        rhs_montecarlo,
        rhs_montecarlo_se,
        samples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerangementSumReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
}

/// `Σ_{σ∈D_4} Tr{T_σ A₁⊗A₂⊗A₁⊗A₂}` against
/// `2Tr{A₁A₂A₁A₂} + 2d²⟨A₁A₂⟩² + d(d+4)` for traceless Hermitian involutions.
pub fn verify_derangement_sum(a1: &DenseOperator, a2: &DenseOperator) -> Result<DerangementSumReport> {
    let d = a1.dim();
    if a2.dim() != d {
        return Err(OtocError::DimensionMismatch("A1 and A2 differ in dimension".into()));
    }
    check_traceless(&[a1.clone(), a2.clone()], d)?;
    for (name, a) in [("A1", a1), ("A2", a2)] {
        if !a.is_hermitian(1e-10) || !a.is_unitary(1e-10) {
            return Err(OtocError::InvalidArgument(format!("{name} must be Hermitian and unitary")));
        }
    }
    let ops = [a1, a2, a1, a2];
    let mut lhs = Complex64::new(0.0, 0.0);
    for s in derangements(4)? {
        lhs += trace_with_permutation(&s, &ops)?;
    }
    let df = d as f64;
    let abab = DenseOperator::product(&ops)?.trace();
    let corr = a1.trace_product(a2)? / df;
    let rhs = abab * 2.0 + corr * corr * (2.0 * df * df) + df * (df + 4.0);
    Ok(DerangementSumReport { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_otoc::otoc_4k;
    use crate::qlinalg::haar_unitary;

    fn random_traceless(d: usize, rng: &mut RandomStream) -> DenseOperator {
        let u = haar_unitary(d, rng).unwrap();
        let v = haar_unitary(d, rng).unwrap();
        let a = u.add(&v.scale_real(0.5)).unwrap();
        let shift = a.trace() / d as f64;
        a.sub(&DenseOperator::identity(d).scale(shift)).unwrap()
    }

    #[test]
    fn shots_serde() {
        assert_eq!(serde_json::from_str::<Shots>("\"exact\"").unwrap(), Shots::Exact);
        assert_eq!(serde_json::from_str::<Shots>("1000").unwrap(), Shots::Finite(1000));
        assert!(serde_json::from_str::<Shots>("0").is_err());
        assert!(serde_json::from_str::<Shots>("\"many\"").is_err());
        assert_eq!(serde_json::to_string(&Shots::Finite(7)).unwrap(), "7");
    }

    #[test]
    fn fact2_weingarten_route_is_exact() {
        let mut rng = RandomStream::new(Seed(3));
        for (k, d) in [(2, 4), (3, 4), (4, 4), (2, 8), (3, 8), (4, 8)] {
            let ops: Vec<_> = (0..k).map(|_| random_traceless(d, &mut rng)).collect();
            let r = verify_fact2(k, &ops, 0, Seed(0)).unwrap();
            assert!((r.lhs - r.rhs_weingarten).norm() < 1e-8 * r.lhs.norm().max(1.0), "{k} {d} {r:?}");
        }
    }

    #[test]
    fn fact2_montecarlo_route_agrees() {
        let mut rng = RandomStream::new(Seed(5));
        let ops: Vec<_> = (0..2).map(|_| random_traceless(4, &mut rng)).collect();
        let r = verify_fact2(2, &ops, 40_000, Seed(6)).unwrap();
        let dev = (r.rhs_montecarlo - r.rhs_weingarten).norm();
        assert!(dev < 4.0 * r.rhs_montecarlo_se, "{r:?}");
    }

    #[test]
    fn fact2_zero_operator_and_errors() {
        let z = DenseOperator::zeros(4);
        let a = random_traceless(4, &mut RandomStream::new(Seed(1)));
        let r = verify_fact2(2, &[z, a.clone()], 50, Seed(2)).unwrap();
        assert!(r.lhs.norm() < 1e-14 && r.rhs_weingarten.norm() < 1e-12 && r.rhs_montecarlo.norm() < 1e-12);
        let id = DenseOperator::identity(4);
        assert!(verify_fact2(2, &[id, a.clone()], 0, Seed(0)).is_err());
        assert!(verify_fact2(5, &vec![a.clone(); 5], 0, Seed(0)).is_err());
    }

    #[test]
    fn derangement_closed_form() {
        let p = |s: &str| s.parse::<PauliString>().unwrap().matrix();
        for (a, b) in [("ZI", "IZ"), ("XI", "XI"), ("XY", "ZZ"), ("XZ", "ZX")] {
            let r = verify_derangement_sum(&p(a), &p(b)).unwrap();
            assert!((r.lhs - r.rhs).norm() < 1e-8, "{a} {b} {r:?}");
        }
        let mut rng = RandomStream::new(Seed(9));
        let u = haar_unitary(4, &mut rng).unwrap();
        let a = u.matmul(&p("ZI")).unwrap().matmul(&u.adjoint()).unwrap();
        let r = verify_derangement_sum(&a, &p("IX")).unwrap();
        assert!((r.lhs - r.rhs).norm() < 1e-8);
        let not_involution = p("ZI").scale_real(2.0);
        assert!(verify_derangement_sum(&not_involution, &p("IZ")).is_err());
    }

    #[test]
    fn time_zero_estimates_one() {
        let w: PauliString = "ZI".parse().unwrap();
        let v: PauliString = "IZ".parse().unwrap();
        let cfg = GlobalRunConfig::new(2, 0.0, w, v, 20_000, Seed(10)).unwrap();
        let r = run_global_protocol(&cfg).unwrap();
        assert!((r.c4_estimate - 1.0).abs() < 3.0 * r.c4_se, "{} {}", r.c4_estimate, r.c4_se);
        assert!((r.c8_estimate - 1.0).abs() < 3.0 * r.c8_se, "{} {}", r.c8_estimate, r.c8_se);
    }

    #[test]
    fn finite_shots_agree_with_exact() {
        let spec = HamiltonianSpectrum::new(2, IsingParams::default()).unwrap();
        let w: PauliString = "ZI".parse().unwrap();
        let v: PauliString = "IZ".parse().unwrap();
        let exact = otoc_4k(&spec, 3.0, &w, &v, 1).unwrap().re;
        let mut cfg = GlobalRunConfig::new(2, 3.0, w, v, 20_000, Seed(11)).unwrap();
        let a = run_global_protocol(&cfg).unwrap();
        cfg.shots = Shots::Finite(1000);
        cfg.seed = Seed(12);
        let b = run_global_protocol(&cfg).unwrap();
        let se = (a.c4_se.powi(2) + b.c4_se.powi(2)).sqrt();
        assert!((a.c4_estimate - b.c4_estimate).abs() < 3.0 * se);
        assert!((a.c4_estimate - exact).abs() < 3.0 * a.c4_se);
        for r in &b.per_unitary_records {
            assert!(r.x.abs() <= 1.0 && r.y.abs() <= 1.0);
        }
    }

    #[test]
    fn records_csv_and_validation() {
        let w: PauliString = "ZI".parse().unwrap();
        let v: PauliString = "IZ".parse().unwrap();
        let cfg = GlobalRunConfig::new(2, 1.0, w.clone(), v.clone(), 3, Seed(1)).unwrap();
        let r = run_global_protocol(&cfg).unwrap();
        let mut buf = Vec::new();
        write_records_csv(&r.per_unitary_records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("index,x,y\n"));
        assert_eq!(text.lines().count(), 4);
        let mut bad = cfg.clone();
        bad.num_unitaries = 0;
        assert!(run_global_protocol(&bad).is_err());
        let mut bad = cfg;
        bad.w = "iZI".parse().unwrap();
        assert!(run_global_protocol(&bad).is_err());
    }
}
