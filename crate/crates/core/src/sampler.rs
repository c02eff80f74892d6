//! Synthetic homodyne data: `phi` uniform on `[0, pi)`, `a` drawn from the
//! closed-form output density by inverse-CDF sampling on a per-sample table.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{p_a_lobes, NoiseModel, OutputDensity, SignalModel};
use crate::error::{Error, Result};
use crate::gallery::TargetStateSpec;
use crate::parallel;

/// Points in each inverse-CDF table.
pub const TABLE_POINTS: usize = 4096;
/// Half width of the table window in lobe standard deviations.
pub const TABLE_SIGMAS: f64 = 10.0;
/// Generator description stored in dataset metadata.
pub const RNG_DESCRIPTION: &str =
    "ChaCha8Rng (rand_chacha 0.9) seed_from_u64(seed), set_stream(sample index); draws: phi, then a";

/// Largest double strictly below pi.
const PHI_MAX: f64 = f64::from_bits(PI.to_bits() - 1);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSample {
    pub a: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiMode {
    #[default]
    Uniform,
    /// `phi_i = pi (i + u_i) / n`.
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub spec: TargetStateSpec,
    pub signal: SignalModel,
    pub noise: NoiseModel,
    pub seed: u64,
    pub n: usize,
    pub rng: String,
    #[serde(default)]
    pub phi_mode: PhiMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneDataset {
    pub samples: Vec<QuadratureSample>,
    /// Absent for data read without a side-car file.
    pub meta: Option<DatasetMeta>,
}

impl HomodyneDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SamplerOptions {
    pub phi_mode: PhiMode,
    /// Worker count; `None` defers to `MAGTOMO_THREADS` or the global pool.
    pub threads: Option<usize>,
}

/// Tabulated CDF with monotone cubic Hermite interpolation between nodes.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl InverseCdf {
    /// Tabulates `f` on `points` equally spaced nodes of `[lo, hi]`; the CDF is
    /// the trapezoid rule, normalised to end at 1.
    pub fn tabulate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo < hi) || points < 2 {
            return Err(Error::InvalidParameter(format!(
                "bad table window [{lo}, {hi}] x {points}"
            )));
        }
        let h = (hi - lo) / (points - 1) as f64;
        let xs: Vec<f64> = (0..points).map(|i| lo + h * i as f64).collect();
        let mut pdf: Vec<f64> = xs.iter().map(|&x| f(x).max(0.0)).collect();
        let mut cdf = Vec::with_capacity(points);
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in pdf.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) || !acc.is_finite() {
            return Err(Error::InvalidParameter(
                "density vanishes on the table window".into(),
            ));
        }
        for v in cdf.iter_mut() {
            *v /= acc;
        }
        for v in pdf.iter_mut() {
            *v /= acc;
        }
        Ok(InverseCdf { xs, cdf, pdf })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().expect("nonempty table"))
    }

    fn spacing(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    // Cubic Hermite value and derivative on cell j at local coordinate s.
    fn hermite(&self, j: usize, s: f64) -> (f64, f64) {
        let h = self.spacing();
        let (f0, f1) = (self.cdf[j], self.cdf[j + 1]);
        let (m0, m1) = (h * self.pdf[j], h * self.pdf[j + 1]);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * f0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * f1
            + (s3 - s2) * m1;
        let d = (6.0 * s2 - 6.0 * s) * f0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * f1
            + (3.0 * s2 - 2.0 * s) * m1;
        (v, d)
    }

    /// Interpolated CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (x - lo) / self.spacing();
        let j = (t.floor() as usize).min(self.xs.len() - 2);
        self.hermite(j, t - j as f64).0
    }

    /// Inverse of [`InverseCdf::cdf`] for `u` in `[0, 1]`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .clamp(1, self.cdf.len() - 1)
            - 1;
        let (c0, c1) = (self.cdf[j], self.cdf[j + 1]);
        if c1 <= c0 {
            return self.xs[j];
        }
        // Each cell's cubic is monotone (slopes average to the secant), so
        // Newton's method safeguarded by bisection converges on [0, 1].
        let (mut a, mut b) = (0.0, 1.0);
        let mut s = ((u - c0) / (c1 - c0)).clamp(0.0, 1.0);
        for _ in 0..60 {
            let (v, d) = self.hermite(j, s);
            let r = v - u;
            if r > 0.0 {
                b = s;
            } else {
                a = s;
            }
            let mut next = if d > 0.0 { s - r / d } else { f64::NAN };
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - s).abs() < 1e-15 {
                s = next;
                break;
            }
            s = next;
        }
        self.xs[j] + s * self.spacing()
    }
}

/// Inverse-CDF table of `p_a(., phi)` over the lobe window.
pub fn output_table(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    phi: f64,
) -> Result<InverseCdf> {
    let density = OutputDensity::new(spec, signal, noise, phi)?;
    let lobes = p_a_lobes(spec, signal, noise, phi);
    let sd = lobes.iter().map(|l| l.1).fold(0.0, f64::max);
    let lo = lobes.iter().map(|l| l.0).fold(f64::INFINITY, f64::min) - TABLE_SIGMAS * sd;
    let hi = lobes.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max) + TABLE_SIGMAS * sd;
    InverseCdf::tabulate(|a| density.eval(a), lo, hi, TABLE_POINTS)
}

fn check_inputs(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    n: usize,
) -> Result<()> {
    spec.validate()?;
    signal.validate()?;
    noise.validate()?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "sample count must be positive".into(),
        ));
    }
    Ok(())
}

fn stream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64);
    rng
}

pub fn sample_dataset(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
) -> Result<HomodyneDataset> {
    sample_dataset_with(spec, signal, noise, n, seed, SamplerOptions::default())
}

pub fn sample_dataset_with(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    n: usize,
    seed: u64,
    options: SamplerOptions,
) -> Result<HomodyneDataset> {
    check_inputs(spec, signal, noise, n)?;
    let draw = |i: usize| -> Result<QuadratureSample> {
        let mut rng = stream(seed, i);
        let u_phi: f64 = rng.random();
        let u_a: f64 = rng.random();
        let phi = match options.phi_mode {
            PhiMode::Uniform => PI * u_phi,
            PhiMode::Stratified => PI * (i as f64 + u_phi) / n as f64,
        }
        .min(PHI_MAX);
        let a = output_table(spec, signal, noise, phi)?.quantile(u_a);
        Ok(QuadratureSample { a, phi })
    };
    let run = || (0..n).into_par_iter().map(draw).collect::<Result<Vec<_>>>();
    let samples = match options.threads {
        Some(t) => parallel::with_threads(Some(t), run),
        None => parallel::install(run),
    }?;
    Ok(HomodyneDataset {
        samples,
        meta: Some(DatasetMeta {
            spec: *spec,
            signal: *signal,
            noise: *noise,
            seed,
            n,
            rng: RNG_DESCRIPTION.to_string(),
            phi_mode: options.phi_mode,
        }),
    })
}

/// `n` draws of `a` at a single fixed phase, sharing one table. Uses the same
/// per-index streams as [`sample_dataset`] (one word per sample).
pub fn sample_a_at_phi(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    phi: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(spec, signal, noise, n)?;
    let table = output_table(spec, signal, noise, phi)?;
    Ok(parallel::install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| table.quantile(stream(seed, i).random()))
            .collect()
    }))
}

/// `<dir>/<stem>.meta.json` for a dataset at `path`.
pub fn meta_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes `a,phi` CSV with 17 significant digits, plus the meta side-car.
pub fn write_dataset(ds: &HomodyneDataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "a,phi")?;
    for s in &ds.samples {
        writeln!(out, "{:.16e},{:.16e}", s.a, s.phi)?;
    }
    out.flush()?;
    if let Some(meta) = &ds.meta {
        fs::write(meta_path(path), serde_json::to_string_pretty(meta)?)?;
    }
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<HomodyneDataset> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    match lines.next() {
        None => return Err(Error::schema(None, "empty dataset file")),
        Some(h) => {
            if h?.trim() != "a,phi" {
                return Err(Error::schema(Some(1), "expected header `a,phi`"));
            }
        }
    }
    let mut samples = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let no = k + 2;
        let mut fields = line.trim().split(',');
        let (Some(a), Some(phi), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::schema(Some(no), "expected two fields `a,phi`"));
        };
        let parse = |s: &str, name: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::schema(Some(no), format!("{name} is not a number: {s:?}")))
        };
        let a = parse(a, "a")?;
        let phi = parse(phi, "phi")?;
        if !a.is_finite() {
            return Err(Error::schema(Some(no), "a must be finite"));
        }
        if !(0.0..PI).contains(&phi) {
            return Err(Error::schema(
                Some(no),
                format!("phi = {phi} outside [0, pi)"),
            ));
        }
        samples.push(QuadratureSample { a, phi });
    }
    if samples.is_empty() {
        return Err(Error::schema(None, "dataset has no samples"));
    }
    let mp = meta_path(path);
    let meta = if mp.exists() {
        let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&mp)?)?;
        if meta.n != samples.len() {
            return Err(Error::schema(
                None,
                format!(
                    "meta declares n = {} but file holds {} samples",
                    meta.n,
                    samples.len()
                ),
            ));
        }
        Some(meta)
    } else {
        None
    };
    Ok(HomodyneDataset { samples, meta })
}
