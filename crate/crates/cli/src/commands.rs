use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use magtomo::fock::{wigner, FockCutoff, GridSpec};
use magtomo::gallery::TargetStateSpec;
use magtomo::mle::{reconstruct, report_of, ReconstructionReport};
use magtomo::pipeline::{evaluate_pipeline, score, target_density, Metrics, PipelineConfig, Stage};
use magtomo::sampler::{read_dataset, sample_dataset_with, write_dataset, SamplerOptions};
use magtomo::snr::{length_sweep, theta_off_resonance};
use magtomo::{Error, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::{self, EvaluateConfig, ReconstructConfig, SimulateConfig, SnrConfig};

/// Failure with the pipeline stage it came from, when known.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub stage: Option<Stage>,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, stage: None }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::from(Error::Io(e))
    }
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub cutoff: Option<usize>,
}

impl Overrides {
    fn cutoff(&self, from_config: FockCutoff) -> Result<FockCutoff> {
        match self.cutoff {
            Some(d) => FockCutoff::new(d),
            None => Ok(from_config),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

pub fn simulate(
    config_path: &Path,
    out: &Path,
    ov: &Overrides,
) -> std::result::Result<(), Failure> {
    let cfg: SimulateConfig = config::load(config_path)?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    check_n(cfg.n)?;
    cfg.target.validate()?;
    let options = SamplerOptions {
        phi_mode: cfg.phi_mode,
        threads: None,
    };
    let ds = sample_dataset_with(&cfg.target, &cfg.signal, &cfg.noise, cfg.n, seed, options)?;
    fs::create_dir_all(out)?;
    write_dataset(&ds, &out.join("dataset.csv"))?;
    log::info!("wrote {} samples to {}", ds.len(), out.display());
    Ok(())
}

/// Report JSON with fidelity fields merged in at the top level.
fn report_value(report: &ReconstructionReport, metrics: Option<&Metrics>) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    if let (Some(m), Value::Object(map)) = (metrics, &mut v) {
        map.insert(
            "fidelity".into(),
            serde_json::to_value(m.fidelity_to_target)?,
        );
        if let Some(f) = m.fidelity_to_classical {
            map.insert("fidelity_to_classical".into(), serde_json::to_value(f)?);
        }
        map.insert("metrics".into(), serde_json::to_value(m)?);
    }
    Ok(v)
}

fn write_wigners(
    out: &Path,
    target: Option<&TargetStateSpec>,
    report: &ReconstructionReport,
    grid: &GridSpec,
) -> Result<()> {
    wigner(&report.rho_pred, grid).save_csv(&out.join("wigner_pred.csv"))?;
    if let Some(spec) = target {
        let rho = target_density(spec, FockCutoff::new(report.rho_pred.dim())?)?;
        wigner(&rho, grid).save_csv(&out.join("wigner_target.csv"))?;
    }
    Ok(())
}

pub fn reconstruct_cmd(
    config_path: &Path,
    out: &Path,
    ov: &Overrides,
) -> std::result::Result<(), Failure> {
    let cfg: ReconstructConfig = config::load(config_path)?;
    let cutoff = ov.cutoff(cfg.cutoff)?;
    let mle = cfg.mle.with_cutoff(cutoff)?;
    if let Some(t) = &cfg.target {
        t.validate()?;
    }
    let dataset_path: PathBuf = config::resolve(config_path, &cfg.dataset);
    let ds = read_dataset(&dataset_path)?;
    let meta = ds.meta.as_ref();
    let signal = cfg.signal.or(meta.map(|m| m.signal)).ok_or_else(|| {
        Error::InvalidParameter("signal missing from config and dataset side-car".into())
    })?;
    let noise = cfg.noise.or(meta.map(|m| m.noise)).ok_or_else(|| {
        Error::InvalidParameter("noise missing from config and dataset side-car".into())
    })?;
    let outcome = reconstruct(&ds.samples, &signal, &noise, &mle);
    let not_converged = matches!(outcome, Err(Error::NotConverged(_)));
    let report = report_of(outcome)?;
    let metrics = match &cfg.target {
        Some(spec) => Some(score(spec, &report.rho_pred, Some(&report))?),
        None => None,
    };
    fs::create_dir_all(out)?;
    write_json(
        &out.join("report.json"),
        &report_value(&report, metrics.as_ref())?,
    )?;
    write_wigners(out, cfg.target.as_ref(), &report, &cfg.wigner)?;
    if not_converged {
        // Files are written; the exit code still signals the failure.
        return Err(Error::NotConverged(Box::new(report)).into());
    }
    Ok(())
}

#[derive(Serialize)]
struct SnrSummary {
    theta_off: f64,
    omega_in_rad_per_s: f64,
    r_in: f64,
    rows: usize,
}

pub fn snr(config_path: &Path, out: &Path, _ov: &Overrides) -> std::result::Result<(), Failure> {
    let cfg: SnrConfig = config::load(config_path)?;
    if !(cfg.r_in.is_finite() && cfg.r_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_in must be non-negative, got {}",
            cfg.r_in
        ))
        .into());
    }
    let lengths = cfg.l_grid.lengths()?;
    let rows = length_sweep(&cfg.scenario, &lengths, cfg.r_in)?;
    let theta_off = theta_off_resonance(&cfg.scenario.material, cfg.scenario.omega_in);
    fs::create_dir_all(out)?;
    let mut w = BufWriter::new(fs::File::create(out.join("snr.csv"))?);
    writeln!(w, "l,rho_opt,theta,sigma_s,sigma_b")?;
    for r in &rows {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.l, r.rho_opt, r.theta, r.sigma_s, r.sigma_b
        )?;
    }
    w.flush()?;
    let summary = SnrSummary {
        theta_off,
        omega_in_rad_per_s: cfg.scenario.omega_in,
        r_in: cfg.r_in,
        rows: rows.len(),
    };
    write_json(&out.join("snr.json"), &summary)?;
    log::info!("theta_off = {theta_off:.4}, {} rows", rows.len());
    Ok(())
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    #[serde(flatten)]
    metrics: &'a Metrics,
    n: usize,
    seed: u64,
    cutoff: usize,
    theta_rad: f64,
    sigma_s: f64,
    wigner_min_pred: f64,
    wigner_min_target: f64,
}

pub fn evaluate(
    config_path: &Path,
    out: &Path,
    ov: &Overrides,
) -> std::result::Result<(), Failure> {
    let cfg: EvaluateConfig = config::load(config_path)?;
    let Some(target) = cfg.target else {
        return Err(Error::InvalidParameter(
            "evaluate needs a target state to score against; use `reconstruct` for data without one".into(),
        )
        .into());
    };
    target.validate()?;
    check_n(cfg.n)?;
    let cutoff = ov.cutoff(cfg.cutoff)?;
    let pipeline = PipelineConfig {
        spec: target,
        signal: cfg.signal,
        noise: cfg.noise,
        n: cfg.n,
        seed: ov.seed.unwrap_or(cfg.seed),
        sampler: SamplerOptions {
            phi_mode: cfg.phi_mode,
            threads: None,
        },
        reconstruction: cfg.mle.with_cutoff(cutoff)?,
        grid: Some(cfg.wigner),
    };
    let ev = evaluate_pipeline(&pipeline).map_err(|e| Failure {
        error: e.source,
        stage: Some(e.stage),
    })?;
    fs::create_dir_all(out)?;
    write_dataset(&ev.dataset, &out.join("dataset.csv"))?;
    write_json(
        &out.join("report.json"),
        &report_value(&ev.report, Some(&ev.metrics))?,
    )?;
    let (wt, wp) = (
        ev.wigner_target.expect("grid requested"),
        ev.wigner_pred.expect("grid requested"),
    );
    wt.save_csv(&out.join("wigner_target.csv"))?;
    wp.save_csv(&out.join("wigner_pred.csv"))?;
    let file = MetricsFile {
        label: cfg.label.as_deref(),
        metrics: &ev.metrics,
        n: pipeline.n,
        seed: pipeline.seed,
        cutoff: cutoff.dim(),
        theta_rad: pipeline.signal.theta,
        sigma_s: pipeline.noise.sigma_s,
        wigner_min_pred: wp.min(),
        wigner_min_target: wt.min(),
    };
    write_json(&out.join("metrics.json"), &file)?;
    Ok(())
}
