//! JSON run configurations. Every struct rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::IsingParams;
use crate::error::{OtocError, Result};
use crate::estimators::Mode;
use crate::global_protocol::Shots;
use crate::qlinalg::{Pauli, PauliString};
use crate::rng::Seed;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_hx")]
    pub hx: f64,
    #[serde(default = "default_hz")]
    pub hz: f64,
    /// Defaults to `sqrt(4J² + 2hx² + 2hz²)`.
    #[serde(default)]
    pub e0: Option<f64>,
}

fn default_j() -> f64 {
    1.0
}
fn default_hx() -> f64 {
    1.05
}
fn default_hz() -> f64 {
    0.5
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            j: default_j(),
            hx: default_hx(),
            hz: default_hz(),
            e0: None,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> Result<IsingParams> {
        let mut p = IsingParams::new(self.j, self.hx, self.hz);
        if let Some(e0) = self.e0 {
            p.e0 = e0;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Either an explicit list of times or `{start, stop, step}` (inclusive of
/// `stop` up to rounding).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl TGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            TGrid::List(v) => v.clone(),
            TGrid::Range { start, stop, step } => {
                if !(*step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
                    return Err(OtocError::Config(format!(
                        "t_grid range needs finite start <= stop and step > 0, got {start}..{stop} by {step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 100_000 {
                    return Err(OtocError::Config("t_grid has more than 100000 points".into()));
                }
                // multiply rather than accumulate so grid values are exact multiples
                (0..count).map(|i| start + i as f64 * step).collect()
            }
        };
        if pts.is_empty() {
            return Err(OtocError::Config("t_grid is empty".into()));
        }
        if pts.iter().any(|t| !t.is_finite()) {
            return Err(OtocError::Config("t_grid has a non-finite value".into()));
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(OtocError::Config("t_grid must be strictly increasing".into()));
        }
        Ok(pts)
    }
}

/// Parses an optional Pauli label, falling back to `Z` on `default_qubit`.
pub fn pauli_or(label: &Option<String>, n: usize, default_qubit: usize) -> Result<PauliString> {
    let p = match label {
        Some(s) => s
            .parse::<PauliString>()
            .map_err(|e| OtocError::Config(format!("bad Pauli label {s:?}: {e}")))?,
        None => PauliString::single(n, default_qubit, Pauli::Z)?,
    };
    if p.num_qubits() != n {
        return Err(OtocError::Config(format!("{p} does not act on {n} qubits")));
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactCurveConfig {
    pub n_qubits: usize,
    #[serde(default)]
    pub w: Option<String>,
    #[serde(default)]
    pub v: Option<String>,
    pub t_grid: TGrid,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

pub const EXACT_CURVE_MAX_QUBITS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    MultiBell,
    Mixed,
    SingleBell,
    Commutator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixedQuantity {
    C4,
    L8,
    C8,
}

/// Estimator evaluation in a config: `"exhaustive"` or
/// `{"subsampled": <samples>}`. The subsampling seed is derived per run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Exhaustive,
    Subsampled(u64),
}

impl ModeConfig {
    pub fn resolve(&self, seed: Seed) -> Mode {
        match *self {
            ModeConfig::Exhaustive => Mode::Exhaustive,
            ModeConfig::Subsampled(samples) => Mode::Subsampled { samples, seed },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowRunConfig {
    pub protocol: ProtocolKind,
    pub n_qubits: usize,
    /// OTOC order for `multi_bell` and `single_bell`.
    #[serde(default = "one")]
    pub k: usize,
    /// Quantity for `mixed`.
    #[serde(default)]
    pub quantity: Option<MixedQuantity>,
    #[serde(default)]
    pub w: Option<String>,
    #[serde(default)]
    pub v: Option<String>,
    pub shadow_sizes: Vec<usize>,
    pub repetitions: usize,
    pub mode: ModeConfig,
    pub t_grid: TGrid,
    #[serde(default)]
    pub model: ModelConfig,
    /// Write every shadow next to the results.
    #[serde(default)]
    pub save_shadows: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalRunFileConfig {
    pub n_qubits: usize,
    #[serde(default)]
    pub w: Option<String>,
    #[serde(default)]
    pub v: Option<String>,
    pub t_grid: TGrid,
    pub num_unitaries: usize,
    #[serde(default = "exact_shots")]
    pub shots: Shots,
    /// Computational basis state used as the probe.
    #[serde(default)]
    pub probe_basis_index: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn exact_shots() -> Shots {
    Shots::Exact
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyIdentitiesConfig {
    /// Name of an identity whose left-hand side is shifted by `1e-3`
    /// (negative control).
    #[serde(default)]
    pub perturb: Option<String>,
    #[serde(default = "fact2_samples")]
    pub fact2_montecarlo_samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn fact2_samples() -> usize {
    20_000
}

impl Default for VerifyIdentitiesConfig {
    fn default() -> Self {
        Self {
            perturb: None,
            fact2_montecarlo_samples: fact2_samples(),
            seed: None,
            output_path: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Section {
    pub qubits: Vec<usize>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fact1Section {
    pub qubits: Vec<usize>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShadowVarianceSection {
    pub n_qubits: usize,
    pub shadow_size: usize,
    pub repetitions: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizeSection {
    pub n_qubits: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub trials: usize,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VarianceAuditConfig {
    #[serde(default)]
    pub lemma1: Option<Lemma1Section>,
    #[serde(default)]
    pub fact1: Option<Fact1Section>,
    #[serde(default)]
    pub c4: Option<ShadowVarianceSection>,
    #[serde(default)]
    pub l8_early: Option<ShadowVarianceSection>,
    #[serde(default)]
    pub l8_full: Option<ShadowVarianceSection>,
    #[serde(default)]
    pub c8: Option<ShadowVarianceSection>,
    #[serde(default)]
    pub sample_size: Option<SampleSizeSection>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Reads and parses a config file; any failure is a config error.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OtocError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| OtocError::Config(format!("{}: {e}", path.display())))
}
