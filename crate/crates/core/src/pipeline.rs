//! End-to-end experiment: sample a target, reconstruct it, score the result.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distributions::{NoiseModel, SignalModel};
use crate::error::Error;
use crate::fock::{
    fidelity, mixed_fidelity, wigner, DensityMatrix, FockCutoff, GridSpec, WignerGrid,
};
use crate::gallery::{realize_density, realize_pure, TargetStateSpec};
use crate::mle::{reconstruct, ReconstructionConfig, ReconstructionReport};
use crate::sampler::{sample_dataset_with, HomodyneDataset, SamplerOptions};

/// Below this `|<m>|` the target has no meaningful phase.
pub const PHASE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sample,
    Reconstruct,
    Metrics,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Sample => "sample",
            Stage::Reconstruct => "reconstruct",
            Stage::Metrics => "metrics",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

fn at<T>(stage: Stage, r: crate::Result<T>) -> Result<T, StageError> {
    r.map_err(|source| StageError { stage, source })
}

/// Scores of a predicted state against its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub target: String,
    pub fidelity_to_target: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity_to_classical: Option<f64>,
    /// `[re, im]` of `<m>` in the prediction.
    pub mean_m: [f64; 2],
    pub target_mean_m: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_error_deg: Option<f64>,
    pub purity: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Absolute phase difference in degrees, wrapped to [0, 180].
pub fn phase_error_deg(pred: Complex64, target: Complex64) -> Option<f64> {
    if target.norm() < PHASE_FLOOR || pred.norm() < PHASE_FLOOR {
        return None;
    }
    Some((pred / target).arg().abs().to_degrees())
}

/// Target density matrix at the reconstruction cutoff.
pub fn target_density(spec: &TargetStateSpec, cutoff: FockCutoff) -> crate::Result<DensityMatrix> {
    realize_density(spec, cutoff)
}

pub fn score(
    spec: &TargetStateSpec,
    rho: &DensityMatrix,
    report: Option<&ReconstructionReport>,
) -> crate::Result<Metrics> {
    let cutoff = FockCutoff::new(rho.dim())?;
    let (fidelity_to_target, target_mean) = if spec.is_pure() {
        let psi = realize_pure(spec, cutoff)?;
        (fidelity(&psi, rho)?, psi.mean_m())
    } else {
        let target = realize_density(spec, cutoff)?;
        (mixed_fidelity(&target, rho)?, target.mean_m())
    };
    let fidelity_to_classical = match spec.classical_partner() {
        Some(cl) => Some(mixed_fidelity(&realize_density(&cl, cutoff)?, rho)?),
        None => None,
    };
    let mean = rho.mean_m();
    Ok(Metrics {
        target: spec.name().to_string(),
        fidelity_to_target,
        fidelity_to_classical,
        mean_m: pair(mean),
        target_mean_m: pair(target_mean),
        phase_error_deg: phase_error_deg(mean, target_mean),
        purity: rho.purity(),
        iterations: report.map_or(0, |r| r.iterations),
        converged: report.is_some_and(|r| r.converged),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub spec: TargetStateSpec,
    pub signal: SignalModel,
    pub noise: NoiseModel,
    pub n: usize,
    pub seed: u64,
    pub sampler: SamplerOptions,
    pub reconstruction: ReconstructionConfig,
    /// Wigner grids are skipped when `None`.
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub dataset: HomodyneDataset,
    pub report: ReconstructionReport,
    pub metrics: Metrics,
    pub wigner_target: Option<WignerGrid>,
    pub wigner_pred: Option<WignerGrid>,
}

/// Samples `n` points from the target, reconstructs, and scores.
pub fn evaluate_pipeline(cfg: &PipelineConfig) -> Result<Evaluation, StageError> {
    let dataset = at(
        Stage::Sample,
        sample_dataset_with(
            &cfg.spec,
            &cfg.signal,
            &cfg.noise,
            cfg.n,
            cfg.seed,
            cfg.sampler,
        ),
    )?;
    let report = at(
        Stage::Reconstruct,
        crate::parallel::with_threads(cfg.sampler.threads, || {
            reconstruct(
                &dataset.samples,
                &cfg.signal,
                &cfg.noise,
                &cfg.reconstruction,
            )
        }),
    )?;
    let metrics = at(
        Stage::Metrics,
        score(&cfg.spec, &report.rho_pred, Some(&report)),
    )?;
    let (wigner_target, wigner_pred) = match &cfg.grid {
        Some(grid) => {
            let target = at(
                Stage::Metrics,
                target_density(&cfg.spec, cfg.reconstruction.cutoff),
            )?;
            (
                Some(wigner(&target, grid)),
                Some(wigner(&report.rho_pred, grid)),
            )
        }
        None => (None, None),
    };
    Ok(Evaluation {
        dataset,
        report,
        metrics,
        wigner_target,
        wigner_pred,
    })
}
