//! The five experiment commands. Each returns its output files in memory;
//! [`super::run`] writes them.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::*;
use crate::dynamics::{prepare_mixed_protocol_state, HamiltonianSpectrum};
use crate::error::{OtocError, Result};
use crate::estimators::{
    estimate_c4_mixed, estimate_c4k_multibell, estimate_c4k_single_bell, estimate_c8_mixed,
    estimate_commutator_type, estimate_l8_mixed, EstimatorRecord, EstimatorResult,
};
use crate::exact_otoc::{
    commutator_schatten_norm, commutator_type_correlator, exact_curve_point, expansion_coefficients,
    late_time_haar_average, leading_term_l8_with, otoc_4k, otoc_series,
    schatten_norm_from_otocs,
};
use crate::global_protocol::{run_global_protocol, verify_derangement_sum, verify_fact2, GlobalRunConfig};
use crate::qlinalg::{
    all_permutations, haar_unitary, kron_all, permutation_operator, trace_with_permutation,
    weingarten_matrix, DenseOperator, Pauli, PauliString, Permutation, StateVector,
};
use crate::rng::{RandomStream, Seed};
use crate::shadows::{build_shadow, write_shadow, Shadow, StatePrep};
use crate::variance::{
    c4_variance_audit, c8_variance_report, fact1_audit, l8_variance_audit, lemma1_audit, mean_and_se,
    sample_size_audit, AuditReport,
};

/// A named output file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    /// False when an identity or audit failed.
    pub passed: bool,
}

fn config_err(msg: impl Into<String>) -> OtocError {
    OtocError::Config(msg.into())
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| OtocError::Io(e.into_error()))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn file(name: &str, contents: Vec<u8>) -> OutputFile {
    OutputFile {
        name: name.to_string(),
        contents,
    }
}

// ---------------------------------------------------------------- exact-curve

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactCurveRow {
    pub t: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C8")]
    pub c8: f64,
    #[serde(rename = "C12")]
    pub c12: f64,
    #[serde(rename = "L8")]
    pub l8: f64,
    pub schatten_2: f64,
    pub schatten_4: f64,
}

/// Rows `(t, C4, C8, C12, L8, schatten_2, schatten_4)` over the grid.
pub fn exact_curve_rows(cfg: &ExactCurveConfig) -> Result<Vec<ExactCurveRow>> {
    let n = cfg.n_qubits;
    if !(2..=EXACT_CURVE_MAX_QUBITS).contains(&n) {
        return Err(config_err(format!("n_qubits must be in 2..=10, got {n}")));
    }
    let w = pauli_or(&cfg.w, n, 1)?;
    let v = pauli_or(&cfg.v, n, n)?;
    for (name, p) in [("w", &w), ("v", &v)] {
        if !p.is_hermitian() || p.is_identity() {
            return Err(config_err(format!("{name} must be a Hermitian non-identity Pauli string")));
        }
    }
    if w.support().iter().any(|q| v.support().contains(q)) {
        return Err(config_err("w and v must have disjoint supports"));
    }
    let grid = cfg.t_grid.points()?;
    let spec = HamiltonianSpectrum::new(n, cfg.model.params()?)?;
    grid.par_iter()
        .map(|&t| {
            let p = exact_curve_point(&spec, t, &w, &v)?;
            Ok(ExactCurveRow {
                t,
                c4: p.c4,
                c8: p.c8,
                c12: p.c12,
                l8: p.l8,
                schatten_2: p.schatten_2,
                schatten_4: p.schatten_4,
            })
        })
        .collect()
}

pub fn cmd_exact_curve(cfg: &ExactCurveConfig) -> Result<CommandOutput> {
    let rows = exact_curve_rows(cfg)?;
    Ok(CommandOutput {
        files: vec![file("exact_curve.csv", csv_bytes(&rows)?)],
        passed: true,
    })
}

// ----------------------------------------------------------------- shadow-run

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowRunRow {
    pub t: f64,
    pub shadow_size: usize,
    pub exact: f64,
    pub mean: f64,
    pub se: f64,
    pub repetitions: usize,
    pub mean_abs_dev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub shadow_size: usize,
    /// `|estimate − exact|` averaged over every run at this size.
    pub mean_abs_dev: f64,
    /// Largest `|mean − exact| / se` over the grid.
    pub max_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowRunReport {
    pub protocol: ProtocolKind,
    pub quantity: String,
    pub n_qubits: usize,
    pub seed: u64,
    pub rows: Vec<ShadowRunRow>,
    pub summary: Vec<SizeSummary>,
    pub estimates: Vec<EstimatorRecord>,
}

struct ShadowPlan {
    quantity: String,
    k: usize,
    w: PauliString,
    v: PauliString,
    mixed: MixedQuantity,
}

fn shadow_plan(cfg: &ShadowRunConfig) -> Result<ShadowPlan> {
    let n = cfg.n_qubits;
    if n < 2 {
        return Err(config_err("n_qubits must be at least 2"));
    }
    if cfg.shadow_sizes.is_empty() || cfg.repetitions == 0 {
        return Err(config_err("shadow_sizes and repetitions must be non-empty / positive"));
    }
    if cfg.quantity.is_some() && cfg.protocol != ProtocolKind::Mixed {
        return Err(config_err("quantity applies to the mixed protocol only"));
    }
    let zn = PauliString::single(n, n, Pauli::Z)?;
    let z1 = PauliString::single(n, 1, Pauli::Z)?;
    let xn = PauliString::single(n, n, Pauli::X)?;
    let fixed = |label: &str, given: &Option<String>, want: &PauliString| -> Result<()> {
        if let Some(s) = given {
            let p = pauli_or(&Some(s.clone()), n, 1)?;
            if &p != want {
                return Err(config_err(format!("{label} is fixed to {want} for this protocol, got {p}")));
            }
        }
        Ok(())
    };
    let mixed = cfg.quantity.unwrap_or(MixedQuantity::C4);
    let (quantity, k, w, v) = match cfg.protocol {
        ProtocolKind::MultiBell => {
            if !(1..=3).contains(&cfg.k) {
                return Err(config_err("k must be in 1..=3"));
            }
            if 2 * n > crate::shadows::MAX_SAMPLED_QUBITS {
                return Err(config_err("multi_bell needs 2N <= 14"));
            }
            let w = pauli_or(&cfg.w, n, 1)?;
            let v = pauli_or(&cfg.v, n, n)?;
            if w.support().iter().any(|q| v.support().contains(q)) {
                return Err(config_err("w and v must have disjoint supports"));
            }
            (format!("C{}", 4 * cfg.k), cfg.k, w, v)
        }
        ProtocolKind::Mixed => {
            fixed("v", &cfg.v, &zn)?;
            let w = pauli_or(&cfg.w, n, 1)?;
            if !w.is_hermitian() || w.is_identity() || w.support().contains(&(n - 1)) {
                return Err(config_err("w must be a Hermitian Pauli string off qubit N"));
            }
            let (name, k) = match mixed {
                MixedQuantity::C4 => ("C4", 1),
                MixedQuantity::L8 => ("L8", 2),
                MixedQuantity::C8 => ("C8", 2),
            };
            (name.to_string(), k, w, zn)
        }
        ProtocolKind::SingleBell => {
            fixed("w", &cfg.w, &z1)?;
            fixed("v", &cfg.v, &xn)?;
            if !(1..=3).contains(&cfg.k) {
                return Err(config_err("k must be in 1..=3"));
            }
            (format!("C{}", 4 * cfg.k), cfg.k, z1, xn)
        }
        ProtocolKind::Commutator => {
            fixed("w", &cfg.w, &z1)?;
            fixed("v", &cfg.v, &xn)?;
            ("C_ct".to_string(), 2, z1, xn)
        }
    };
    Ok(ShadowPlan { quantity, k, w, v, mixed })
}

fn shadow_exact(cfg: &ShadowRunConfig, plan: &ShadowPlan, spec: &HamiltonianSpectrum, t: f64) -> Result<f64> {
    Ok(match cfg.protocol {
        ProtocolKind::MultiBell | ProtocolKind::SingleBell => otoc_4k(spec, t, &plan.w, &plan.v, plan.k)?.re,
        ProtocolKind::Mixed => match plan.mixed {
            MixedQuantity::C4 => otoc_4k(spec, t, &plan.w, &plan.v, 1)?.re,
            MixedQuantity::L8 => leading_term_l8_with(spec, t, &plan.w)?,
            MixedQuantity::C8 => otoc_4k(spec, t, &plan.w, &plan.v, 2)?.re,
        },
        ProtocolKind::Commutator => commutator_type_correlator(spec, t)?.re,
    })
}

fn shadow_file_name(ti: usize, size: usize, rep: usize, part: usize) -> String {
    format!("shadows/t{ti:04}_K{size}_r{rep:04}_{part}.shadow")
}

pub fn cmd_shadow_run(cfg: &ShadowRunConfig, seed: Seed) -> Result<CommandOutput> {
    let plan = shadow_plan(cfg)?;
    let grid = cfg.t_grid.points()?;
    let n = cfg.n_qubits;
    let spec = HamiltonianSpectrum::new(n, cfg.model.params()?)?;

    let mut jobs = Vec::new();
    for ti in 0..grid.len() {
        for (si, &size) in cfg.shadow_sizes.iter().enumerate() {
            for rep in 0..cfg.repetitions {
                jobs.push((ti, si, size, rep));
            }
        }
    }

    type JobOut = (EstimatorResult, Vec<OutputFile>);
    let results: Vec<JobOut> = jobs
        .par_iter()
        .map(|&(ti, si, size, rep)| -> Result<JobOut> {
            let t = grid[ti];
            let path = [ti as u64, si as u64, rep as u64];
            let shadow_seed = |part: u64| seed.derive(&[path[0], path[1], path[2], part]);
            let mode = cfg.mode.resolve(seed.derive(&[path[0], path[1], path[2], 99]));
            let mut shadows: Vec<Shadow> = Vec::new();
            let result = match cfg.protocol {
                ProtocolKind::MultiBell => {
                    let s = build_shadow(&StatePrep::bell_dual(&spec, t)?, size, shadow_seed(0))?;
                    let r = estimate_c4k_multibell(&s, &plan.w, &plan.v, plan.k, &mode)?;
                    shadows.push(s);
                    r
                }
                ProtocolKind::Mixed => {
                    let s = build_shadow(&StatePrep::mixed_protocol(&spec, t)?, size, shadow_seed(0))?;
                    let r = match plan.mixed {
                        MixedQuantity::C4 => estimate_c4_mixed(&s, &plan.w, &mode)?,
                        MixedQuantity::L8 => estimate_l8_mixed(&s, &plan.w, &mode)?,
                        MixedQuantity::C8 => estimate_c8_mixed(&s, &plan.w, &mode)?,
                    };
                    shadows.push(s);
                    r
                }
                ProtocolKind::SingleBell => {
                    let s = build_shadow(&StatePrep::single_bell(&spec, t, n)?, size, shadow_seed(0))?;
                    let r = estimate_c4k_single_bell(&s, plan.k, &mode)?;
                    shadows.push(s);
                    r
                }
                ProtocolKind::Commutator => {
                    let a = build_shadow(&StatePrep::single_bell(&spec, t, 1)?, size, shadow_seed(0))?;
                    let b = build_shadow(&StatePrep::single_bell(&spec, t, n)?, size, shadow_seed(1))?;
                    let r = estimate_commutator_type(&a, &b, &mode)?;
                    shadows.push(a);
                    shadows.push(b);
                    r
                }
            };
            let mut files = Vec::new();
            if cfg.save_shadows {
                for (part, s) in shadows.iter().enumerate() {
                    let mut buf = Vec::new();
                    write_shadow(s, &mut buf)?;
                    files.push(file(&shadow_file_name(ti, size, rep, part), buf));
                }
            }
            Ok((result, files))
        })
        .collect::<Result<_>>()?;

    let exact: Vec<f64> = grid
        .par_iter()
        .map(|&t| shadow_exact(cfg, &plan, &spec, t))
        .collect::<Result<_>>()?;

    let reps = cfg.repetitions;
    let mut rows = Vec::new();
    let mut summary: Vec<SizeSummary> = cfg
        .shadow_sizes
        .iter()
        .map(|&s| SizeSummary {
            shadow_size: s,
            mean_abs_dev: 0.0,
            max_z: 0.0,
        })
        .collect();
    let mut idx = 0;
    for (ti, &t) in grid.iter().enumerate() {
        for (si, &size) in cfg.shadow_sizes.iter().enumerate() {
            let vals: Vec<f64> = results[idx..idx + reps].iter().map(|r| r.0.value.re).collect();
            idx += reps;
            let (mean, se) = if reps > 1 {
                mean_and_se(&vals)?
            } else {
                (vals[0], f64::NAN)
            };
            let mad = vals.iter().map(|v| (v - exact[ti]).abs()).sum::<f64>() / reps as f64;
            summary[si].mean_abs_dev += mad / grid.len() as f64;
            if reps > 1 {
                let z = (mean - exact[ti]).abs() / se;
                summary[si].max_z = summary[si].max_z.max(z);
            }
            rows.push(ShadowRunRow {
                t,
                shadow_size: size,
                exact: exact[ti],
                mean,
                se,
                repetitions: reps,
                mean_abs_dev: mad,
            });
        }
    }

    let report = ShadowRunReport {
        protocol: cfg.protocol,
        quantity: plan.quantity,
        n_qubits: n,
        seed: seed.0,
        rows: rows.clone(),
        summary,
        estimates: results.iter().map(|r| r.0.record()).collect(),
    };
    let mut files = vec![
        file("shadow_run.csv", csv_bytes(&rows)?),
        file("shadow_run.json", json_bytes(&report)?),
    ];
    for (_, f) in results {
        files.extend(f);
    }
    Ok(CommandOutput { files, passed: true })
}

// ----------------------------------------------------------------- global-run

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalRunRow {
    pub t: f64,
    pub c4_estimate: f64,
    pub c4_se: f64,
    pub c4_exact: f64,
    pub c8_estimate: f64,
    pub c8_se: f64,
    pub c8_exact: f64,
    pub num_unitaries: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct GlobalRecordRow {
    t: f64,
    index: usize,
    x: f64,
    y: f64,
}

pub fn global_run_rows(cfg: &GlobalRunFileConfig, seed: Seed) -> Result<(Vec<GlobalRunRow>, Vec<u8>)> {
    let n = cfg.n_qubits;
    if !(2..=8).contains(&n) {
        return Err(config_err("n_qubits must be in 2..=8 (d <= 256)"));
    }
    if cfg.num_unitaries < 2 {
        return Err(config_err("num_unitaries must be at least 2"));
    }
    let w = pauli_or(&cfg.w, n, 1)?;
    let v = pauli_or(&cfg.v, n, n)?;
    if w.support().iter().any(|q| v.support().contains(q)) || !w.is_hermitian() || !v.is_hermitian() {
        return Err(config_err("w and v must be Hermitian with disjoint supports"));
    }
    if cfg.probe_basis_index >= 1 << n {
        return Err(config_err("probe_basis_index out of range"));
    }
    let params = cfg.model.params()?;
    let spec = HamiltonianSpectrum::new(n, params)?;
    let grid = cfg.t_grid.points()?;
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (ti, &t) in grid.iter().enumerate() {
        let run = GlobalRunConfig {
            n_qubits: n,
            t,
            w: w.clone(),
            v: v.clone(),
            num_unitaries: cfg.num_unitaries,
            shots: cfg.shots,
            probe_state: StateVector::basis(n, cfg.probe_basis_index)?,
            params,
            seed: seed.derive(&[ti as u64]),
        };
        let r = run_global_protocol(&run)?;
        let exact = otoc_series(&spec, t, &w, &v, 2)?;
        rows.push(GlobalRunRow {
            t,
            c4_estimate: r.c4_estimate,
            c4_se: r.c4_se,
            c4_exact: exact[0].re,
            c8_estimate: r.c8_estimate,
            c8_se: r.c8_se,
            c8_exact: exact[1].re,
            num_unitaries: cfg.num_unitaries,
        });
        records.extend(r.per_unitary_records.iter().map(|u| GlobalRecordRow {
            t,
            index: u.index,
            x: u.x,
            y: u.y,
        }));
    }
    Ok((rows, csv_bytes(&records)?))
}

pub fn cmd_global_run(cfg: &GlobalRunFileConfig, seed: Seed) -> Result<CommandOutput> {
    let (rows, records) = global_run_rows(cfg, seed)?;
    Ok(CommandOutput {
        files: vec![file("global_run.csv", csv_bytes(&rows)?), file("global_records.csv", records)],
        passed: true,
    })
}

// ---------------------------------------------------------- verify-identities

pub const IDENTITY_NAMES: [&str; 11] = [
    "c8_composition",
    "rho_v_square",
    "permutation_trace",
    "derangement_sum",
    "fact2_weingarten",
    "fact2_montecarlo",
    "weingarten_row_sum",
    "schatten_expansion",
    "boundary_values",
    "late_time_haar",
    "derangement_count",
];

/// Amount added to the residual of a perturbed identity.
pub const PERTURBATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub identities: Vec<IdentityCheck>,
    pub all_pass: bool,
}

fn random_traceless(d: usize, rng: &mut RandomStream) -> Result<DenseOperator> {
    let a = haar_unitary(d, rng)?.add(&haar_unitary(d, rng)?.scale_real(0.5))?;
    let shift = a.trace() / d as f64;
    a.sub(&DenseOperator::identity(d).scale(shift))
}

fn random_operator(d: usize, rng: &mut RandomStream) -> Result<DenseOperator> {
    Ok(haar_unitary(d, rng)?.scale_real(rng.next_f64() + 0.5))
}

struct Residuals {
    cases: usize,
    max: f64,
}

impl Residuals {
    fn new() -> Self {
        Self { cases: 0, max: 0.0 }
    }
    fn push(&mut self, r: f64) {
        self.cases += 1;
        self.max = if r.is_nan() { f64::NAN } else { self.max.max(r) };
    }
}

fn identity_c8_composition(seed: Seed) -> Result<Residuals> {
    let mut res = Residuals::new();
    let mut rng = RandomStream::new(seed);
    for n in 2..=4 {
        let spec = HamiltonianSpectrum::new(n, Default::default())?;
        let w = PauliString::single(n, 1, Pauli::Z)?;
        let v = PauliString::single(n, n, Pauli::Z)?;
        for _ in 0..20 {
            let t = 20.0 * rng.next_f64();
            let c = otoc_series(&spec, t, &w, &v, 2)?;
            let l8 = leading_term_l8_with(&spec, t, &w)?;
            res.push((c[1] - (l8 - 4.0 * c[0] - 3.0)).norm());
        }
    }
    Ok(res)
}

fn identity_rho_v_square(seed: Seed) -> Result<Residuals> {
    let mut res = Residuals::new();
    let mut rng = RandomStream::new(seed);
    for n in 2..=4 {
        let spec = HamiltonianSpectrum::new(n, Default::default())?;
        let d = spec.dim() as f64;
        for _ in 0..20 {
            let t = 20.0 * rng.next_f64();
            let rho = prepare_mixed_protocol_state(n, &spec, t)?;
            let sq = rho.matmul(&rho)?;
            res.push(sq.distance(&rho.scale_real(2.0 / d))?);
        }
    }
    Ok(res)
}

fn identity_permutation_trace(seed: Seed) -> Result<Residuals> {
    let mut res = Residuals::new();
    let mut rng = RandomStream::new(seed);
    for k in 1..=4usize {
        for d in [2usize, 3] {
            for p in all_permutations(k) {
                let ops: Vec<DenseOperator> = (0..k).map(|_| random_operator(d, &mut rng)).collect::<Result<_>>()?;
                let refs: Vec<&DenseOperator> = ops.iter().collect();
                let fast = trace_with_permutation(&p, &refs)?;
                let dense = permutation_operator(&p, d)?.trace_product(&kron_all(&refs))?;
                res.push((fast - dense).norm() / dense.norm().max(1.0));
            }
        }
    }
    Ok(res)
}

fn identity_derangement_sum(seed: Seed) -> Result<Residuals> {
    let mut res = Residuals::new();
    let mut rng = RandomStream::new(seed);
    let pairs = [("ZI", "IZ"), ("XI", "XI"), ("XY", "ZZ"), ("XZ", "ZX"), ("YI", "IY")];
    for (a, b) in pairs {
        let r = verify_derangement_sum(&a.parse::<PauliString>()?.matrix(), &b.parse::<PauliString>()?.matrix())?;
        res.push((r.lhs - r.rhs).norm());
    }
    for n in [2usize, 3] {
        let d = 1 << n;
        for _ in 0..5 {
            let u = haar_unitary(d, &mut rng)?;
            let w = PauliString::single(n, 1, Pauli::Z)?.matrix();
            let a1 = u.matmul(&w)?.matmul(&u.adjoint())?;
            let a2 = PauliString::single(n, n, Pauli::X)?.matrix();
            let r = verify_derangement_sum(&a1, &a2)?;
            res.push((r.lhs - r.rhs).norm());
        }
    }
    Ok(res)
}

fn identity_fact2(seed: Seed, mc_samples: usize) -> Result<(Residuals, Residuals)> {
    let mut exact = Residuals::new();
    let mut mc = Residuals::new();
    let mut rng = RandomStream::new(seed);
    for k in 2..=4usize {
        for d in [4usize, 8] {
            let ops: Vec<DenseOperator> = (0..k).map(|_| random_traceless(d, &mut rng)).collect::<Result<_>>()?;
            let samples = if k == 2 && d == 4 { mc_samples } else { 0 };
            let r = verify_fact2(k, &ops, samples, seed.derive(&[k as u64, d as u64]))?;
            exact.push((r.lhs - r.rhs_weingarten).norm() / r.lhs.norm().max(1.0));
            if samples > 0 {
                // in units of standard errors
                mc.push((r.rhs_montecarlo - r.rhs_weingarten).norm() / r.rhs_montecarlo_se);
            }
        }
    }
    Ok((exact, mc))
}

fn identity_weingarten_row_sum() -> Result<Residuals> {
    let mut res = Residuals::new();
    for k in 1..=4usize {
        for d in [4usize, 8] {
            let wg = weingarten_matrix(k, d)?;
            let expect = 1.0 / (0..k).map(|i| (d + i) as f64).product::<f64>();
            for j in 0..wg.len() {
                let sum: f64 = (0..wg.len()).map(|i| wg.get(i, j)).sum();
                res.push((sum - expect).abs() / expect);
            }
        }
    }
    Ok(res)
}

fn identity_schatten_expansion(seed: Seed) -> Result<Residuals> {
    let mut res = Residuals::new();
    let mut rng = RandomStream::new(seed);
    for n_qubits in [2usize, 3] {
        let spec = HamiltonianSpectrum::new(n_qubits, Default::default())?;
        let w = PauliString::single(n_qubits, 1, Pauli::Z)?;
        let v = PauliString::single(n_qubits, n_qubits, Pauli::Z)?;
        for _ in 0..5 {
            let t = 20.0 * rng.next_f64();
            for n in 1..=3usize {
                let p = (2 * n) as i32;
                let direct = commutator_schatten_norm(&spec, t, &w, &v, n)?.powi(p);
                let series = otoc_series(&spec, t, &w, &v, n)?;
                let expanded = schatten_norm_from_otocs(spec.dim(), &series)?.powi(p);
                res.push((direct - expanded).abs() / (1.0 + direct.abs()));
            }
        }
    }
    // b_0 + Σ b_k = 0 since the commutator vanishes at t = 0
    for n in 1..=6 {
        res.push(expansion_coefficients(n)?.iter().sum::<f64>().abs());
    }
    Ok(res)
}

fn identity_boundary_values() -> Result<Residuals> {
    let mut res = Residuals::new();
    for n in 2..=6 {
        let spec = HamiltonianSpectrum::new(n, Default::default())?;
        let w = PauliString::single(n, 1, Pauli::Z)?;
        let v = PauliString::single(n, n, Pauli::Z)?;
        for c in otoc_series(&spec, 0.0, &w, &v, 3)? {
            res.push((c - Complex64::new(1.0, 0.0)).norm());
        }
        res.push((leading_term_l8_with(&spec, 0.0, &w)? - 8.0).abs());
    }
    Ok(res)
}

fn identity_late_time_haar() -> Result<Residuals> {
    let mut res = Residuals::new();
    for d in [2usize, 4, 8, 16] {
        let df = d as f64;
        res.push((late_time_haar_average(1, d)? + 1.0 / (df * df - 1.0)).abs());
    }
    Ok(res)
}

fn identity_derangement_count() -> Result<Residuals> {
    // |D_k| = round(k!/e)
    let mut res = Residuals::new();
    for k in 1..=6usize {
        let count = crate::qlinalg::derangements(k)?.len() as f64;
        let fact: f64 = (1..=k).map(|i| i as f64).product();
        res.push((count - (fact / std::f64::consts::E).round()).abs());
        let direct = all_permutations(k).iter().filter(|p: &&Permutation| p.is_derangement()).count();
        res.push((count - direct as f64).abs());
    }
    Ok(res)
}

pub fn verify_identities(cfg: &VerifyIdentitiesConfig, seed: Seed) -> Result<IdentityReport> {
    if let Some(p) = &cfg.perturb {
        if !IDENTITY_NAMES.contains(&p.as_str()) {
            return Err(config_err(format!("unknown identity {p:?} in perturb")));
        }
    }
    let s = |i: u64| seed.derive(&[i]);
    let (fact2_exact, fact2_mc) = identity_fact2(s(4), cfg.fact2_montecarlo_samples)?;
    let mut checks: Vec<(&str, Residuals, f64)> = vec![
        ("c8_composition", identity_c8_composition(s(0))?, 1e-8),
        ("rho_v_square", identity_rho_v_square(s(1))?, 1e-8),
        ("permutation_trace", identity_permutation_trace(s(2))?, 1e-8),
        ("derangement_sum", identity_derangement_sum(s(3))?, 1e-8),
        ("fact2_weingarten", fact2_exact, 1e-8),
        // Monte Carlo residual is measured in standard errors
        ("fact2_montecarlo", fact2_mc, 4.0),
        ("weingarten_row_sum", identity_weingarten_row_sum()?, 1e-8),
        ("schatten_expansion", identity_schatten_expansion(s(5))?, 1e-8),
        ("boundary_values", identity_boundary_values()?, 1e-9),
        ("late_time_haar", identity_late_time_haar()?, 1e-8),
        ("derangement_count", identity_derangement_count()?, 0.0),
    ];
    debug_assert_eq!(checks.len(), IDENTITY_NAMES.len());
    if let Some(p) = &cfg.perturb {
        for c in &mut checks {
            if c.0 == p {
                c.1.max += PERTURBATION;
            }
        }
    }
    let identities: Vec<IdentityCheck> = checks
        .into_iter()
        .map(|(name, r, tol)| IdentityCheck {
            name: name.to_string(),
            cases: r.cases,
            max_residual: r.max,
            tolerance: tol,
            pass: r.cases > 0 && r.max <= tol,
        })
        .collect();
    let all_pass = identities.iter().all(|c| c.pass);
    Ok(IdentityReport { identities, all_pass })
}

pub fn cmd_verify_identities(cfg: &VerifyIdentitiesConfig, seed: Seed) -> Result<CommandOutput> {
    let report = verify_identities(cfg, seed)?;
    Ok(CommandOutput {
        passed: report.all_pass,
        files: vec![file("identities.json", json_bytes(&report)?)],
    })
}

// ------------------------------------------------------------- variance-audit

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceAuditReport {
    pub audits: Vec<AuditReport>,
    pub all_pass: bool,
}

fn random_mixed_state(n: usize, rng: &mut RandomStream) -> Result<DenseOperator> {
    let d = 1usize << n;
    let u = haar_unitary(d, rng)?;
    let col: Vec<Complex64> = (0..d).map(|r| u[(r, 0)]).collect();
    let pure = StateVector::new(col)?.density_matrix();
    pure.scale_real(0.8).add(&DenseOperator::identity(d).scale_real(0.2 / d as f64))
}

pub fn variance_audit(cfg: &VarianceAuditConfig, seed: Seed) -> Result<VarianceAuditReport> {
    let params = cfg.model.params()?;
    let mut audits = Vec::new();
    let spec_for = |n: usize| -> Result<HamiltonianSpectrum> {
        if !(2..=3).contains(&n) {
            return Err(config_err("shadow variance audits need n_qubits in 2..=3"));
        }
        HamiltonianSpectrum::new(n, params)
    };
    let z = |n: usize, q: usize| PauliString::single(n, q, Pauli::Z);
    if let Some(sec) = &cfg.lemma1 {
        for (i, &n) in sec.qubits.iter().enumerate() {
            if !(1..=3).contains(&n) {
                return Err(config_err("lemma1 qubits must be in 1..=3"));
            }
            let mut rng = RandomStream::new(seed.derive(&[0, i as u64]));
            let rho = random_mixed_state(n, &mut rng)?;
            for (j, w) in [z(n, 1)?, PauliString::identity(n)].into_iter().enumerate() {
                audits.push(lemma1_audit(&rho, &w, sec.samples, seed.derive(&[1, i as u64, j as u64]))?);
            }
        }
    }
    if let Some(sec) = &cfg.fact1 {
        for (i, &n) in sec.qubits.iter().enumerate() {
            if !(1..=3).contains(&n) {
                return Err(config_err("fact1 qubits must be in 1..=3"));
            }
            let mut rng = RandomStream::new(seed.derive(&[2, i as u64]));
            let d = 1usize << n;
            let u = haar_unitary(d, &mut rng)?;
            let psi = StateVector::new((0..d).map(|r| u[(r, 0)]).collect())?;
            let letters = [Pauli::X, Pauli::Y, Pauli::Z];
            let o = PauliString::new((0..n).map(|q| letters[q % 3]).collect(), 0);
            audits.push(fact1_audit(&psi, &o, sec.samples, seed.derive(&[3, i as u64]))?);
        }
    }
    if let Some(sec) = &cfg.c4 {
        let spec = spec_for(sec.n_qubits)?;
        let w = z(sec.n_qubits, 1)?;
        audits.push(c4_variance_audit(&spec, sec.t, &w, sec.shadow_size, sec.repetitions, seed.derive(&[4]))?);
    }
    for (tag, sec, early) in [(5u64, &cfg.l8_early, true), (6, &cfg.l8_full, false)] {
        if let Some(sec) = sec {
            let spec = spec_for(sec.n_qubits)?;
            let w = z(sec.n_qubits, 1)?;
            audits.push(l8_variance_audit(&spec, sec.t, &w, sec.shadow_size, sec.repetitions, early, seed.derive(&[tag]))?);
        }
    }
    if let Some(sec) = &cfg.c8 {
        let spec = spec_for(sec.n_qubits)?;
        let w = z(sec.n_qubits, 1)?;
        audits.push(c8_variance_report(&spec, sec.t, &w, sec.shadow_size, sec.repetitions, seed.derive(&[7]))?);
    }
    if let Some(sec) = &cfg.sample_size {
        let spec = spec_for(sec.n_qubits)?;
        let n = sec.n_qubits;
        audits.push(sample_size_audit(
            &spec,
            sec.t,
            &z(n, 1)?,
            &z(n, n)?,
            sec.epsilon,
            sec.delta,
            sec.trials,
            seed.derive(&[8]),
        )?);
    }
    if audits.is_empty() {
        return Err(config_err("no audit sections selected"));
    }
    let all_pass = audits.iter().all(|a| a.pass);
    Ok(VarianceAuditReport { audits, all_pass })
}

pub fn cmd_variance_audit(cfg: &VarianceAuditConfig, seed: Seed) -> Result<CommandOutput> {
    let report = variance_audit(cfg, seed)?;
    Ok(CommandOutput {
        passed: report.all_pass,
        files: vec![file("variance_audit.json", json_bytes(&report)?)],
    })
}
