//! Per-command JSON configs. Unknown fields are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use magtomo::distributions::{NoiseModel, SignalModel};
use magtomo::fock::{FockCutoff, GridSpec};
use magtomo::gallery::TargetStateSpec;
use magtomo::mle::{PovmConstruction, ReconstructionConfig, StopRule};
use magtomo::sampler::PhiMode;
use magtomo::snr::WaveguideScenario;
use magtomo::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Deserialize;

/// MLE block; the cutoff lives at the top level of each config.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleBlock {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_log_every")]
    pub likelihood_log_every: usize,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default)]
    pub povm: PovmConstruction,
}

fn default_tol() -> f64 {
    ReconstructionConfig::default().tol
}

fn default_max_iter() -> usize {
    ReconstructionConfig::default().max_iter
}

fn default_log_every() -> usize {
    ReconstructionConfig::default().likelihood_log_every
}

impl Default for MleBlock {
    fn default() -> Self {
        let d = ReconstructionConfig::default();
        MleBlock {
            tol: d.tol,
            max_iter: d.max_iter,
            likelihood_log_every: d.likelihood_log_every,
            stop_rule: d.stop_rule,
            povm: d.povm,
        }
    }
}

impl MleBlock {
    pub fn with_cutoff(&self, cutoff: FockCutoff) -> Result<ReconstructionConfig> {
        let cfg = ReconstructionConfig {
            cutoff,
            tol: self.tol,
            max_iter: self.max_iter,
            likelihood_log_every: self.likelihood_log_every,
            stop_rule: self.stop_rule,
            povm: self.povm,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub target: TargetStateSpec,
    pub signal: SignalModel,
    pub noise: NoiseModel,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub phi_mode: PhiMode,
    /// Accepted for symmetry with the other commands; unused.
    #[serde(default)]
    #[allow(dead_code)]
    pub cutoff: Option<FockCutoff>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Resolved against the config file's directory when relative.
    pub dataset: PathBuf,
    /// Taken from the dataset side-car when omitted.
    #[serde(default)]
    pub signal: Option<SignalModel>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub cutoff: FockCutoff,
    #[serde(default)]
    pub mle: MleBlock,
    #[serde(default)]
    pub target: Option<TargetStateSpec>,
    #[serde(default)]
    pub wigner: GridSpec,
    /// Accepted for symmetry with the other commands; unused.
    #[serde(default)]
    #[allow(dead_code)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateConfig {
    #[serde(default)]
    pub target: Option<TargetStateSpec>,
    pub signal: SignalModel,
    pub noise: NoiseModel,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub phi_mode: PhiMode,
    #[serde(default)]
    pub cutoff: FockCutoff,
    #[serde(default)]
    pub mle: MleBlock,
    #[serde(default)]
    pub wigner: GridSpec,
    /// Free-form label copied into `metrics.json`.
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthGrid {
    pub start_um: f64,
    pub stop_um: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl LengthGrid {
    /// Lengths in metres.
    pub fn lengths(&self) -> Result<Vec<f64>> {
        if self.points == 0 {
            return Ok(Vec::new());
        }
        if !(self.start_um > 0.0 && self.stop_um >= self.start_um) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < start_um <= stop_um, got {} and {}",
                self.start_um, self.stop_um
            )));
        }
        let (lo, hi) = (self.start_um * 1e-6, self.stop_um * 1e-6);
        Ok(match self.spacing {
            Spacing::Log => magtomo::snr::log_grid(lo, hi, self.points),
            Spacing::Linear if self.points == 1 => vec![lo],
            Spacing::Linear => (0..self.points)
                .map(|i| lo + (hi - lo) * i as f64 / (self.points - 1) as f64)
                .collect(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrConfig {
    pub scenario: WaveguideScenario,
    pub l_grid: LengthGrid,
    /// Input squeezing parameter.
    #[serde(default)]
    pub r_in: f64,
    /// Accepted for symmetry with the other commands; unused.
    #[serde(default)]
    #[allow(dead_code)]
    pub seed: Option<u64>,
    #[serde(default)]
    #[allow(dead_code)]
    pub cutoff: Option<FockCutoff>,
}

/// Reads and validates a config. JSON problems are schema errors.
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| {
        let line = (e.line() > 0).then_some(e.line());
        Error::schema(line, format!("{}: {e}", path.display()))
    })
}

pub fn resolve(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}
