//! Noisy homodyne POVM elements and the fixed-point maximum-likelihood
//! iteration `rho <- (Z rho + rho Z) / 2`.

use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{gauss, NoiseModel, SignalModel};
use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockCutoff, QuadratureBasis};
use crate::parallel;
use crate::sampler::QuadratureSample;

/// `Tr[rho P_i]` below this aborts the iteration.
pub const ZERO_PROBABILITY: f64 = 1e-300;
/// Summed population of the top three Fock levels that triggers a cutoff warning.
pub const CUTOFF_WARNING_LEVEL: f64 = 1e-3;
/// Eigenvalue floor for an accepted iterate.
pub const PSD_TOL: f64 = 1e-10;
/// Allowed per-step decrease of the mean log-likelihood.
pub const LOGLIK_TOL: f64 = 1e-9;

const TRACE_TOL: f64 = 1e-12;
const ACCEPT_SLACK: f64 = 1e-12;
const CHUNK: usize = 512;
const MAX_HALVINGS: usize = 60;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn mixing(signal: &SignalModel) -> Result<(f64, f64)> {
    signal.validate()?;
    if signal.theta == 0.0 || signal.theta == FRAC_PI_2 {
        return Err(Error::DegenerateTheta(signal.theta));
    }
    Ok(signal.sin_cos())
}

/// How a POVM element is represented in the truncated Fock space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmConstruction {
    /// Matrix elements `<j|P|l>` of the untruncated operator, by Gauss-Hermite
    /// quadrature that is exact for the polynomial degree involved.
    #[default]
    Projected,
    /// Functional calculus on the truncated `m_phi`: eigenvalue `lambda` gets
    /// weight `(1/cos) p_eta((a - sin lambda) / cos)`.
    Spectral,
}

/// Weight of each `m_phi` eigenvalue in the spectral construction.
fn profile_into(
    a: f64,
    phi: f64,
    (s, c): (f64, f64),
    noise: &NoiseModel,
    eigenvalues: &[f64],
    out: &mut [f64],
) {
    let sigma = noise.sigma_phi(phi);
    let var = sigma * sigma;
    for (o, &l) in out.iter_mut().zip(eigenvalues) {
        *o = gauss((a - s * l) / c, 0.0, var) / c;
    }
}

/// Builds the real core `Q = W W^T` of POVM elements, `P[j, l] = e^{i phi (j - l)} Q[j, l]`.
struct CoreBuilder<'a> {
    basis: &'a QuadratureBasis,
    construction: PovmConstruction,
    sc: (f64, f64),
    noise: &'a NoiseModel,
}

impl CoreBuilder<'_> {
    /// Fills the factor `W` (column `k` belongs to quadrature node `k`).
    fn factor(&self, a: f64, phi: f64, w: &mut DMatrix<f64>) {
        let basis = self.basis;
        let d = basis.dim();
        let (s, c) = self.sc;
        match self.construction {
            PovmConstruction::Spectral => {
                let mut f = vec![0.0; d];
                profile_into(a, phi, self.sc, self.noise, &basis.eigenvalues, &mut f);
                for k in 0..d {
                    let r = f[k].sqrt();
                    for j in 0..d {
                        w[(j, k)] = basis.vectors[(j, k)] * r;
                    }
                }
            }
            PovmConstruction::Projected => {
                // psi_0^2 times the noise kernel in m is a Gaussian in m with
                // mean mbar and variance v, scaled by N(mu; 0, 1 + w^2) / sin.
                let sigma = self.noise.sigma_phi(phi);
                let mu = a / s;
                let w2 = (c * sigma / s).powi(2);
                let mbar = mu / (1.0 + w2);
                let sd = (w2 / (1.0 + w2)).sqrt();
                let scale = gauss(mu, 0.0, 1.0 + w2) / s;
                for k in 0..d {
                    let x = mbar + sd * basis.eigenvalues[k];
                    let mut prev = (basis.weights[k] * scale).sqrt();
                    w[(0, k)] = prev;
                    if d > 1 {
                        let mut cur = x * prev;
                        w[(1, k)] = cur;
                        for j in 1..d - 1 {
                            let next =
                                (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
                            prev = cur;
                            cur = next;
                            w[(j + 1, k)] = cur;
                        }
                    }
                }
            }
        }
    }

    fn core(&self, a: f64, phi: f64) -> DMatrix<f64> {
        let d = self.basis.dim();
        let mut w = DMatrix::zeros(d, d);
        self.factor(a, phi, &mut w);
        &w * w.transpose()
    }
}

#[derive(Debug, Clone)]
pub struct PovmElement {
    pub a: f64,
    pub phi: f64,
    pub matrix: CMatrix,
}

/// POVM element in the default (projected) construction.
pub fn povm_element(
    a: f64,
    phi: f64,
    signal: &SignalModel,
    noise: &NoiseModel,
    cutoff: FockCutoff,
) -> Result<PovmElement> {
    povm_element_as(
        PovmConstruction::default(),
        &QuadratureBasis::new(cutoff),
        a,
        phi,
        signal,
        noise,
    )
}

pub fn povm_element_as(
    construction: PovmConstruction,
    basis: &QuadratureBasis,
    a: f64,
    phi: f64,
    signal: &SignalModel,
    noise: &NoiseModel,
) -> Result<PovmElement> {
    let sc = mixing(signal)?;
    noise.validate()?;
    let builder = CoreBuilder {
        basis,
        construction,
        sc,
        noise,
    };
    let q = builder.core(a, phi);
    let d = basis.dim();
    let matrix = CMatrix::from_fn(d, d, |j, l| {
        Complex64::from_polar(q[(j, l)], phi * (j as f64 - l as f64))
    });
    Ok(PovmElement { a, phi, matrix })
}

/// Eigenvalue weights of the spectral construction, in [`QuadratureBasis`] order.
pub fn spectral_profile(
    basis: &QuadratureBasis,
    a: f64,
    phi: f64,
    signal: &SignalModel,
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    let sc = mixing(signal)?;
    let mut out = vec![0.0; basis.dim()];
    profile_into(a, phi, sc, noise, &basis.eigenvalues, &mut out);
    Ok(out)
}

fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Start of diagonal `m` in diagonal-major packed storage.
fn diag_offset(d: usize, m: usize) -> usize {
    m * d - m * (m.saturating_sub(1)) / 2
}

/// All POVM elements of a dataset. Each is stored as the packed upper
/// triangle of its real core `Q_i`; `P_i[j, l] = e^{i phi_i (j - l)} Q_i[j, l]`.
#[derive(Debug, Clone)]
pub struct PovmCache {
    dim: usize,
    n: usize,
    packed: Vec<f64>,
    /// `(cos m phi_i, sin m phi_i)` for `m < dim`.
    trig: Vec<[f64; 2]>,
    samples: Vec<QuadratureSample>,
}

impl PovmCache {
    pub fn new(
        samples: &[QuadratureSample],
        signal: &SignalModel,
        noise: &NoiseModel,
        cutoff: FockCutoff,
    ) -> Result<Self> {
        Self::with_construction(samples, signal, noise, cutoff, PovmConstruction::default())
    }

    pub fn with_construction(
        samples: &[QuadratureSample],
        signal: &SignalModel,
        noise: &NoiseModel,
        cutoff: FockCutoff,
        construction: PovmConstruction,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("dataset is empty".into()));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| !s.a.is_finite() || !s.phi.is_finite())
        {
            return Err(Error::InvalidParameter(format!("sample {i} is not finite")));
        }
        let sc = mixing(signal)?;
        noise.validate()?;
        let basis = QuadratureBasis::new(cutoff);
        let d = basis.dim();
        let np = packed_len(d);
        let builder = CoreBuilder {
            basis: &basis,
            construction,
            sc,
            noise,
        };
        let mut packed = vec![0.0; np * samples.len()];
        packed
            .par_chunks_mut(np)
            .zip(samples.par_iter())
            .for_each_init(
                || DMatrix::zeros(d, d),
                |w, (out, s)| {
                    builder.factor(s.a, s.phi, w);
                    let q = &*w * w.transpose();
                    for m in 0..d {
                        let off = diag_offset(d, m);
                        for j in 0..d - m {
                            out[off + j] = q[(j, j + m)];
                        }
                    }
                },
            );
        let trig = samples
            .iter()
            .flat_map(|s| {
                (0..d).map(move |m| {
                    let (sn, cs) = (m as f64 * s.phi).sin_cos();
                    [cs, sn]
                })
            })
            .collect();
        Ok(PovmCache {
            dim: d,
            n: samples.len(),
            packed,
            trig,
            samples: samples.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn samples(&self) -> &[QuadratureSample] {
        &self.samples
    }

    /// Full matrix of element `i`.
    pub fn element(&self, i: usize) -> CMatrix {
        let d = self.dim;
        let q = &self.packed[i * packed_len(d)..(i + 1) * packed_len(d)];
        let phi = self.samples[i].phi;
        CMatrix::from_fn(d, d, |j, l| {
            let (lo, m) = if l >= j { (j, l - j) } else { (l, j - l) };
            Complex64::from_polar(q[diag_offset(d, m) + lo], phi * (j as f64 - l as f64))
        })
    }

    /// `Tr[rho P_i]` for every sample.
    pub fn probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        self.check_dim(rho.dim())?;
        let (rr, ri) = lower_diagonals(rho.elements());
        Ok((0..self.n).map(|i| self.probability(i, &rr, &ri)).collect())
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: d,
            })
        }
    }

    fn probability(&self, i: usize, rr: &[f64], ri: &[f64]) -> f64 {
        let d = self.dim;
        let np = packed_len(d);
        let q = &self.packed[i * np..(i + 1) * np];
        let trig = &self.trig[i * d..(i + 1) * d];
        let mut p = 0.0;
        for m in 0..d {
            let off = diag_offset(d, m);
            let len = d - m;
            let (q, r, im) = (&q[off..off + len], &rr[off..off + len], &ri[off..off + len]);
            let mut sr = 0.0;
            let mut si = 0.0;
            for j in 0..len {
                sr += r[j] * q[j];
                si += im[j] * q[j];
            }
            if m == 0 {
                p += sr;
            } else {
                p += 2.0 * (trig[m][0] * sr + trig[m][1] * si);
            }
        }
        p
    }

    // Sum over `range` of w_i P_i in packed form, with w_i = 1 / Tr[rho P_i]
    // when `rho` is given and 1 otherwise.
    fn partial(&self, range: Range<usize>, rho: Option<(&[f64], &[f64])>) -> Result<Partial> {
        let d = self.dim;
        let np = packed_len(d);
        let mut acc = Partial {
            loglik: 0.0,
            zr: vec![0.0; np],
            zi: vec![0.0; np],
        };
        for i in range {
            let w = match rho {
                Some((rr, ri)) => {
                    let p = self.probability(i, rr, ri);
                    if !(p >= ZERO_PROBABILITY) {
                        return Err(Error::ZeroProbabilitySample(i));
                    }
                    acc.loglik += p.ln();
                    1.0 / p
                }
                None => 1.0,
            };
            let q = &self.packed[i * np..(i + 1) * np];
            let trig = &self.trig[i * d..(i + 1) * d];
            for m in 0..d {
                let off = diag_offset(d, m);
                let len = d - m;
                let wc = w * trig[m][0];
                let ws = w * trig[m][1];
                let q = &q[off..off + len];
                let zr = &mut acc.zr[off..off + len];
                for j in 0..len {
                    zr[j] += wc * q[j];
                }
                let zi = &mut acc.zi[off..off + len];
                for j in 0..len {
                    zi[j] -= ws * q[j];
                }
            }
        }
        Ok(acc)
    }

    /// Mean log-likelihood and `Z` (or the plain element sum when `rho` is None).
    fn sweep(&self, rho: Option<&CMatrix>) -> Result<(f64, CMatrix)> {
        let diags = rho.map(lower_diagonals);
        let view = diags.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()));
        let chunks = self.n.div_ceil(CHUNK);
        let parts = (0..chunks)
            .into_par_iter()
            .map(|c| self.partial(c * CHUNK..((c + 1) * CHUNK).min(self.n), view))
            .collect::<Result<Vec<_>>>()?;
        let total = pairwise(parts);
        let d = self.dim;
        let scale = 1.0 / self.n as f64;
        let mut z = CMatrix::zeros(d, d);
        for m in 0..d {
            let off = diag_offset(d, m);
            for j in 0..d - m {
                let v = Complex64::new(total.zr[off + j], total.zi[off + j]) * scale;
                z[(j, j + m)] = v;
                z[(j + m, j)] = v.conj();
            }
        }
        Ok((total.loglik * scale, z))
    }
}

struct Partial {
    loglik: f64,
    zr: Vec<f64>,
    zi: Vec<f64>,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.loglik += other.loglik;
        for (a, b) in self.zr.iter_mut().zip(&other.zr) {
            *a += b;
        }
        for (a, b) in self.zi.iter_mut().zip(&other.zi) {
            *a += b;
        }
        self
    }
}

/// Fixed-order pairwise reduction, independent of the worker count.
fn pairwise(mut parts: Vec<Partial>) -> Partial {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => a.merge(b),
                None => a,
            });
        }
        parts = next;
    }
    parts.pop().expect("at least one chunk")
}

/// `rho[j + m, j]` in diagonal-major order, split into real and imaginary parts.
fn lower_diagonals(rho: &CMatrix) -> (Vec<f64>, Vec<f64>) {
    let d = rho.nrows();
    let mut rr = Vec::with_capacity(packed_len(d));
    let mut ri = Vec::with_capacity(packed_len(d));
    for m in 0..d {
        for j in 0..d - m {
            let v = rho[(j + m, j)];
            rr.push(v.re);
            ri.push(v.im);
        }
    }
    (rr, ri)
}

/// `Z(rho) = (1/N) sum_i P_i / Tr[rho P_i]`.
pub fn z_operator(rho: &DensityMatrix, cache: &PovmCache) -> Result<CMatrix> {
    cache.check_dim(rho.dim())?;
    Ok(cache.sweep(Some(rho.elements()))?.1)
}

/// Mean log-likelihood `(1/N) sum_i ln Tr[rho P_i]`.
pub fn log_likelihood(rho: &DensityMatrix, cache: &PovmCache) -> Result<f64> {
    cache.check_dim(rho.dim())?;
    Ok(cache.sweep(Some(rho.elements()))?.0)
}

/// `(Z rho + rho Z) / 2`, formed as the Hermitian part of `Z rho`.
pub fn fixed_point_update(rho: &CMatrix, z: &CMatrix) -> CMatrix {
    let g = z * rho;
    (&g + g.adjoint()) * re(0.5)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * re(0.5)
}

fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Initial guess `sum_i P_i`, normalised.
pub fn initial_guess(cache: &PovmCache) -> Result<DensityMatrix> {
    let (_, s) = cache.sweep(None)?;
    let tr = s.trace().re;
    Ok(DensityMatrix::from_matrix_unchecked(
        hermitian_part(&s) / re(tr),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    /// `(Z rho + rho Z) / 2` accepted as is.
    Symmetric,
    /// `(I + eps Z) rho (I + eps Z)` normalised; used when the symmetric
    /// update leaves the positive cone or lowers the likelihood.
    Diluted,
    /// No admissible step larger than the tolerance.
    Stationary,
}

struct Evaluated {
    rho: CMatrix,
    loglik: f64,
    z: CMatrix,
}

struct StepOutcome {
    next: Evaluated,
    step_norm: f64,
    kind: StepKind,
    epsilon: f64,
    trace_drift: f64,
    min_eigenvalue: f64,
}

fn evaluate(cache: &PovmCache, rho: CMatrix) -> Result<Evaluated> {
    let (loglik, z) = cache.sweep(Some(&rho))?;
    Ok(Evaluated { rho, loglik, z })
}

fn safeguarded_step(cache: &PovmCache, cur: &Evaluated, tol: f64) -> Result<StepOutcome> {
    let d = cache.dim();
    let mut f = fixed_point_update(&cur.rho, &cur.z);
    let tr = f.trace().re;
    let trace_drift = (tr - 1.0).abs();
    if trace_drift > TRACE_TOL {
        log::debug!("renormalising trace drift {trace_drift:e}");
        f /= re(tr);
    }
    let step_norm = (&f - &cur.rho).norm();
    let lam = min_eigenvalue(&f);
    if lam >= -PSD_TOL {
        let trial = evaluate(cache, f)?;
        if trial.loglik >= cur.loglik - ACCEPT_SLACK {
            return Ok(StepOutcome {
                next: trial,
                step_norm,
                kind: StepKind::Symmetric,
                epsilon: 1.0,
                trace_drift,
                min_eigenvalue: lam,
            });
        }
    }
    let id = CMatrix::identity(d, d);
    let mut eps = 1.0;
    for _ in 0..MAX_HALVINGS {
        let k = &id + &cur.z * re(eps);
        let g = hermitian_part(&(&k * &cur.rho * &k));
        let g = &g / re(g.trace().re);
        let norm = (&g - &cur.rho).norm();
        if norm < tol {
            break;
        }
        let lam = min_eigenvalue(&g);
        if lam >= -PSD_TOL {
            let trial = evaluate(cache, g)?;
            if trial.loglik >= cur.loglik - ACCEPT_SLACK {
                return Ok(StepOutcome {
                    next: trial,
                    step_norm: norm,
                    kind: StepKind::Diluted,
                    epsilon: eps,
                    trace_drift,
                    min_eigenvalue: lam,
                });
            }
        }
        eps *= 0.5;
    }
    // Nothing admissible above the tolerance: the current iterate stands.
    Ok(StepOutcome {
        next: Evaluated {
            rho: cur.rho.clone(),
            loglik: cur.loglik,
            z: cur.z.clone(),
        },
        step_norm: 0.0,
        kind: StepKind::Stationary,
        epsilon: 0.0,
        trace_drift,
        min_eigenvalue: min_eigenvalue(&cur.rho),
    })
}

/// One safeguarded iteration from `rho`.
pub fn mle_step(rho: &DensityMatrix, cache: &PovmCache) -> Result<DensityMatrix> {
    cache.check_dim(rho.dim())?;
    let cur = evaluate(cache, rho.elements().clone())?;
    let out = safeguarded_step(cache, &cur, 0.0)?;
    Ok(DensityMatrix::from_matrix_unchecked(out.next.rho))
}

/// What ends the iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop once the step norm drops below `tol`; hitting `max_iter` first is
    /// reported as `NotConverged`.
    #[default]
    Tolerance,
    /// Run at most `max_iter` iterations and return the last iterate.
    IterationBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructionConfig {
    #[serde(default)]
    pub cutoff: FockCutoff,
    /// Frobenius norm of `rho_{k+1} - rho_k` at which iteration stops.
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
    1e-8
}

fn default_max_iter() -> usize {
    5000
}

fn default_log_every() -> usize {
    1
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        ReconstructionConfig {
            cutoff: FockCutoff::default(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            likelihood_log_every: default_log_every(),
            stop_rule: StopRule::Tolerance,
            povm: PovmConstruction::Projected,
        }
    }
}

impl ReconstructionConfig {
    pub fn with_cutoff(cutoff: FockCutoff) -> Self {
        ReconstructionConfig {
            cutoff,
            ..Default::default()
        }
    }

    /// Exactly `iterations` steps unless the tolerance is met first.
    pub fn budget(cutoff: FockCutoff, iterations: usize) -> Self {
        ReconstructionConfig {
            cutoff,
            max_iter: iterations,
            stop_rule: StopRule::IterationBudget,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || self.likelihood_log_every == 0 {
            return Err(Error::InvalidParameter(format!(
                "need tol > 0, max_iter >= 1, likelihood_log_every >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffWarning {
    pub top_population: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub samples: usize,
    pub symmetric_steps: usize,
    pub diluted_steps: usize,
    pub renormalizations: usize,
    pub max_trace_drift: f64,
    /// Smallest eigenvalue over all accepted iterates.
    pub min_eigenvalue: f64,
    /// Steps whose log-likelihood fell by more than `LOGLIK_TOL`.
    pub loglik_violations: usize,
    pub cutoff_warning: Option<CutoffWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReportJson", into = "ReportJson")]
pub struct ReconstructionReport {
    pub rho_pred: DensityMatrix,
    pub iterations: usize,
    pub final_step_norm: f64,
    /// `(iteration, mean log-likelihood)`.
    pub loglik_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

pub const MATRIX_ENCODING: &str = "base64 row-major complex, (re, im) f64 little-endian";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportJson {
    dim: usize,
    encoding: String,
    rho_pred: String,
    iterations: usize,
    final_step_norm: f64,
    loglik_trace: Vec<(usize, f64)>,
    converged: bool,
    diagnostics: Diagnostics,
}

pub fn encode_matrix(m: &CMatrix) -> String {
    let mut bytes = Vec::with_capacity(16 * m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            bytes.extend_from_slice(&m[(r, c)].re.to_le_bytes());
            bytes.extend_from_slice(&m[(r, c)].im.to_le_bytes());
        }
    }
    BASE64.encode(bytes)
}

pub fn decode_matrix(text: &str, dim: usize) -> Result<CMatrix> {
    let bytes = BASE64
        .decode(text)
        .map_err(|e| Error::schema(None, format!("bad base64 matrix: {e}")))?;
    if bytes.len() != 16 * dim * dim {
        return Err(Error::schema(
            None,
            format!(
                "matrix holds {} bytes, expected {}",
                bytes.len(),
                16 * dim * dim
            ),
        ));
    }
    let word = |k: usize| f64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(CMatrix::from_fn(dim, dim, |r, c| {
        let k = 2 * (r * dim + c);
        Complex64::new(word(k), word(k + 1))
    }))
}

impl From<ReconstructionReport> for ReportJson {
    fn from(r: ReconstructionReport) -> Self {
        ReportJson {
            dim: r.rho_pred.dim(),
            encoding: MATRIX_ENCODING.into(),
            rho_pred: encode_matrix(r.rho_pred.elements()),
            iterations: r.iterations,
            final_step_norm: r.final_step_norm,
            loglik_trace: r.loglik_trace,
            converged: r.converged,
            diagnostics: r.diagnostics,
        }
    }
}

impl TryFrom<ReportJson> for ReconstructionReport {
    type Error = Error;
    fn try_from(j: ReportJson) -> Result<Self> {
        let m = decode_matrix(&j.rho_pred, j.dim)?;
        Ok(ReconstructionReport {
            rho_pred: DensityMatrix::new(m)?,
            iterations: j.iterations,
            final_step_norm: j.final_step_norm,
            loglik_trace: j.loglik_trace,
            converged: j.converged,
            diagnostics: j.diagnostics,
        })
    }
}

/// State handed to an observer after every accepted iterate (iteration 0 is
/// the initial guess).
#[derive(Debug)]
pub struct IterationInfo<'a> {
    pub iteration: usize,
    pub rho: &'a CMatrix,
    pub loglik: f64,
    pub step_norm: f64,
    pub kind: Option<StepKind>,
    pub epsilon: f64,
    pub trace_drift: f64,
    pub min_eigenvalue: f64,
}

pub fn reconstruct(
    samples: &[QuadratureSample],
    signal: &SignalModel,
    noise: &NoiseModel,
    config: &ReconstructionConfig,
) -> Result<ReconstructionReport> {
    reconstruct_with_observer(samples, signal, noise, config, &mut |_| {})
}

pub fn reconstruct_with_observer(
    samples: &[QuadratureSample],
    signal: &SignalModel,
    noise: &NoiseModel,
    config: &ReconstructionConfig,
    observer: &mut (dyn FnMut(&IterationInfo<'_>) + Send),
) -> Result<ReconstructionReport> {
    config.validate()?;
    parallel::install(|| {
        let cache =
            PovmCache::with_construction(samples, signal, noise, config.cutoff, config.povm)?;
        reconstruct_cached(&cache, config, observer)
    })
}

/// Runs the iteration on an existing cache.
pub fn reconstruct_cached(
    cache: &PovmCache,
    config: &ReconstructionConfig,
    observer: &mut (dyn FnMut(&IterationInfo<'_>) + Send),
) -> Result<ReconstructionReport> {
    config.validate()?;
    cache.check_dim(config.cutoff.dim())?;
    let rho0 = initial_guess(cache)?;
    let mut cur = evaluate(cache, rho0.into_elements())?;
    let mut diag = Diagnostics {
        samples: cache.len(),
        min_eigenvalue: min_eigenvalue(&cur.rho),
        ..Default::default()
    };
    observer(&IterationInfo {
        iteration: 0,
        rho: &cur.rho,
        loglik: cur.loglik,
        step_norm: f64::NAN,
        kind: None,
        epsilon: 0.0,
        trace_drift: 0.0,
        min_eigenvalue: diag.min_eigenvalue,
    });
    let mut trace = vec![(0, cur.loglik)];
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;
    let mut converged = false;
    while iterations < config.max_iter {
        let out = safeguarded_step(cache, &cur, config.tol)?;
        iterations += 1;
        step_norm = out.step_norm;
        if out.trace_drift > TRACE_TOL {
            diag.renormalizations += 1;
        }
        diag.max_trace_drift = diag.max_trace_drift.max(out.trace_drift);
        match out.kind {
            StepKind::Symmetric => diag.symmetric_steps += 1,
            StepKind::Diluted => diag.diluted_steps += 1,
            StepKind::Stationary => {}
        }
        if out.next.loglik < cur.loglik - LOGLIK_TOL {
            diag.loglik_violations += 1;
            log::warn!(
                "log-likelihood fell from {} to {} at iteration {iterations}",
                cur.loglik,
                out.next.loglik
            );
        }
        diag.min_eigenvalue = diag.min_eigenvalue.min(out.min_eigenvalue);
        cur = out.next;
        observer(&IterationInfo {
            iteration: iterations,
            rho: &cur.rho,
            loglik: cur.loglik,
            step_norm,
            kind: Some(out.kind),
            epsilon: out.epsilon,
            trace_drift: out.trace_drift,
            min_eigenvalue: out.min_eigenvalue,
        });
        if iterations % config.likelihood_log_every == 0 {
            trace.push((iterations, cur.loglik));
        }
        if step_norm < config.tol {
            converged = true;
            break;
        }
    }
    if trace.last().map(|t| t.0) != Some(iterations) {
        trace.push((iterations, cur.loglik));
    }
    let rho_pred = DensityMatrix::from_matrix_unchecked(cur.rho);
    let d = rho_pred.dim();
    let top: f64 = rho_pred.populations()[d.saturating_sub(3)..].iter().sum();
    if top > CUTOFF_WARNING_LEVEL {
        log::warn!("top three Fock levels hold {top:e}; the cutoff may be too small");
        diag.cutoff_warning = Some(CutoffWarning {
            top_population: top,
            threshold: CUTOFF_WARNING_LEVEL,
        });
    }
    let report = ReconstructionReport {
        rho_pred,
        iterations,
        final_step_norm: step_norm,
        loglik_trace: trace,
        converged,
        diagnostics: diag,
    };
    if converged || config.stop_rule == StopRule::IterationBudget {
        Ok(report)
    } else {
        Err(Error::NotConverged(Box::new(report)))
    }
}

/// The report whether or not the iteration converged.
pub fn report_of(r: Result<ReconstructionReport>) -> Result<ReconstructionReport> {
    match r {
        Err(Error::NotConverged(rep)) => Ok(*rep),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::p_a;
    use crate::gallery::{realize_density, TargetStateSpec};
    use crate::quadrature::integrate;
    use crate::sampler::sample_dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cut(d: usize) -> FockCutoff {
        FockCutoff::new(d).unwrap()
    }

    fn random_density(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
        let a = CMatrix::from_fn(d, rank, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        DensityMatrix::new(m / re(tr)).unwrap()
    }

    fn random_samples(n: usize, rng: &mut ChaCha8Rng) -> Vec<QuadratureSample> {
        (0..n)
            .map(|_| QuadratureSample {
                a: 6.0 * rng.random::<f64>() - 3.0,
                phi: PI * rng.random::<f64>(),
            })
            .collect()
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn unit_core(basis: &QuadratureBasis, f: &[f64]) -> DMatrix<f64> {
        let d = basis.dim();
        let scaled = DMatrix::from_fn(d, d, |r, k| basis.vectors[(r, k)] * f[k]);
        &scaled * basis.vectors.transpose()
    }

    #[test]
    fn spectral_element_is_diagonal_in_quadrature_basis() {
        let signal = SignalModel::new(0.3 * PI);
        let noise = NoiseModel::adaptive(0.7);
        let basis = QuadratureBasis::new(cut(20));
        let e = povm_element_as(
            PovmConstruction::Spectral,
            &basis,
            0.8,
            1.1,
            &signal,
            &noise,
        )
        .unwrap();
        let profile = spectral_profile(&basis, 0.8, 1.1, &signal, &noise).unwrap();
        assert!(max_abs(&(&e.matrix - e.matrix.adjoint())) < 1e-14);
        assert!(min_eigenvalue(&e.matrix) > -1e-12);
        let u = basis.rotated(1.1);
        let inner = u.adjoint() * &e.matrix * &u;
        for r in 0..20 {
            for c in 0..20 {
                let expect = if r == c { profile[r] } else { 0.0 };
                assert!((inner[(r, c)] - re(expect)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_completeness() {
        // P is linear in the profile, so integrate each eigenvalue weight.
        let signal = SignalModel::new(PI / 4.0);
        let noise = NoiseModel::adaptive(1.0);
        let basis = QuadratureBasis::new(cut(30));
        let integrals: Vec<f64> = (0..30)
            .map(|k| {
                integrate(
                    |a| spectral_profile(&basis, a, 0.4, &signal, &noise).unwrap()[k],
                    -60.0,
                    60.0,
                    16,
                    1e-12,
                    2000,
                )
                .value
            })
            .collect();
        let sum = unit_core(&basis, &integrals);
        let err = (&sum - DMatrix::<f64>::identity(30, 30)).abs().max();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn projected_completeness() {
        let signal = SignalModel::new(PI / 4.0);
        let noise = NoiseModel::adaptive(1.0);
        let basis = QuadratureBasis::new(cut(30));
        let mut sum = CMatrix::zeros(30, 30);
        for (a, w) in crate::quadrature::composite_nodes(-30.0, 30.0, 600) {
            let p = povm_element_as(PovmConstruction::Projected, &basis, a, 0.4, &signal, &noise)
                .unwrap();
            sum += p.matrix * re(w);
        }
        let err = max_abs(&(sum - CMatrix::identity(30, 30)));
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn projected_trace_matches_output_density() {
        // Exact for states inside the cutoff, however narrow the noise kernel.
        let basis = QuadratureBasis::new(cut(30));
        for (theta, sigma) in [(0.35 * PI, 0.6), (0.45 * PI, 0.2), (0.02 * PI, 1.0)] {
            let signal = SignalModel::new(theta);
            let noise = NoiseModel::adaptive(sigma);
            for spec in [
                TargetStateSpec::Vacuum,
                TargetStateSpec::Fock { n: 3 },
                TargetStateSpec::Cat {
                    alpha: Complex64::new(1.0, 0.5),
                    psi: 0.3,
                },
            ] {
                let rho = realize_density(&spec, cut(30)).unwrap();
                for &(a, phi) in &[(-2.0, 0.1), (0.3, 1.2), (1.7, 2.9)] {
                    let p = povm_element_as(
                        PovmConstruction::Projected,
                        &basis,
                        a,
                        phi,
                        &signal,
                        &noise,
                    )
                    .unwrap();
                    let tr = rho.expectation(&p.matrix);
                    let exact = p_a(&spec, &signal, &noise, a, phi).unwrap();
                    assert!(tr.im.abs() < 1e-12);
                    assert!(
                        (tr.re - exact).abs() < 1e-10,
                        "{spec:?} {a} {phi}: {} vs {exact}",
                        tr.re
                    );
                }
            }
        }
    }

    #[test]
    fn projected_trace_holds_at_large_cutoffs() {
        // Wide kernels reach the outermost nodes, where the weights are tiny.
        let spec = TargetStateSpec::SqueezedCoherent {
            alpha: Complex64::new(1.8, -2.4),
            r: 0.4,
            psi: 2.7,
        };
        for d in [60, 80] {
            let basis = QuadratureBasis::new(cut(d));
            let rho = realize_density(&spec, cut(d)).unwrap();
            let signal = SignalModel::new(0.02 * PI);
            let noise = NoiseModel::adaptive(1.0);
            for a in [-4.0, -0.5, 1.2] {
                let p =
                    povm_element_as(PovmConstruction::Projected, &basis, a, 0.3, &signal, &noise)
                        .unwrap();
                let tr = rho.expectation(&p.matrix).re;
                let exact = p_a(&spec, &signal, &noise, a, 0.3).unwrap();
                assert!((tr - exact).abs() < 1e-8, "{d} {a}: {tr} vs {exact}");
            }
        }
    }

    #[test]
    fn spectral_converges_to_projected_for_wide_kernels() {
        let signal = SignalModel::new(PI / 4.0);
        let noise = NoiseModel::adaptive(1.0);
        let basis = QuadratureBasis::new(cut(60));
        let rho = realize_density(&TargetStateSpec::Fock { n: 1 }, cut(60)).unwrap();
        let tr = |c| {
            rho.expectation(
                &povm_element_as(c, &basis, 0.5, 0.2, &signal, &noise)
                    .unwrap()
                    .matrix,
            )
            .re
        };
        assert!((tr(PovmConstruction::Spectral) - tr(PovmConstruction::Projected)).abs() < 1e-6);
    }

    #[test]
    fn projected_elements_nest_across_cutoffs() {
        let signal = SignalModel::new(0.4 * PI);
        let noise = NoiseModel::adaptive(0.3);
        let small = povm_element(1.2, 0.7, &signal, &noise, cut(10))
            .unwrap()
            .matrix;
        let large = povm_element(1.2, 0.7, &signal, &noise, cut(25))
            .unwrap()
            .matrix;
        let block = large.view((0, 0), (10, 10)).into_owned();
        assert!(max_abs(&(small - block)) < 1e-12);
    }

    #[test]
    fn cache_agrees_with_direct_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let signal = SignalModel::new(0.2 * PI);
        let noise = NoiseModel::fixed(0.5, 3.0, 0.4);
        let samples = random_samples(7, &mut rng);
        let cache = PovmCache::new(&samples, &signal, &noise, cut(9)).unwrap();
        let rho = random_density(9, 3, &mut rng);
        let probs = cache.probabilities(&rho).unwrap();
        for (i, s) in samples.iter().enumerate() {
            let direct = povm_element(s.a, s.phi, &signal, &noise, cut(9))
                .unwrap()
                .matrix;
            assert!(max_abs(&(&cache.element(i) - &direct)) < 1e-14);
            assert!((probs[i] - rho.expectation(&direct).re).abs() < 1e-14);
        }
    }

    #[test]
    fn single_sample_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let signal = SignalModel::new(0.3 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let samples = random_samples(1, &mut rng);
        let cache = PovmCache::new(&samples, &signal, &noise, cut(6)).unwrap();
        let rho = random_density(6, 6, &mut rng);
        let z = z_operator(&rho, &cache).unwrap();
        let p = cache.element(0);
        let expect = &p / rho.expectation(&p);
        assert!(max_abs(&(&z - &expect)) < 1e-12);
        assert!((rho.expectation(&z) - re(1.0)).norm() < 1e-12);
    }

    #[test]
    fn z_expectation_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let signal = SignalModel::new(0.4 * PI);
        let noise = NoiseModel::adaptive(0.8);
        for trial in 0..20 {
            let d = 2 + trial % 10;
            let samples = random_samples(1 + 37 * trial, &mut rng);
            let cache = PovmCache::new(&samples, &signal, &noise, cut(d)).unwrap();
            let rho = random_density(d, 1 + trial % d, &mut rng);
            let z = z_operator(&rho, &cache).unwrap();
            assert!(max_abs(&(&z - z.adjoint())) == 0.0);
            assert!((rho.expectation(&z) - re(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_z_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 2..12 {
            let rho = random_density(d, d, &mut rng);
            let next = fixed_point_update(rho.elements(), &CMatrix::identity(d, d));
            assert_eq!(&next, rho.elements());
        }
    }

    #[test]
    fn update_preserves_trace_and_rarely_raises_purity() {
        // Holds for full-rank states and a hundred or more samples; near-pure
        // states or a handful of samples can gain far more.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let signal = SignalModel::new(0.3 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let purity = |m: &CMatrix| m.iter().map(|c| c.norm_sqr()).sum::<f64>();
        for trial in 0..100 {
            let d = 3 + trial % 8;
            let samples = random_samples(100 + 4 * trial, &mut rng);
            let cache = PovmCache::new(&samples, &signal, &noise, cut(d)).unwrap();
            let rho = random_density(d, d, &mut rng);
            let z = z_operator(&rho, &cache).unwrap();
            let f = fixed_point_update(rho.elements(), &z);
            assert!((f.trace() - re(1.0)).norm() < 1e-10, "trial {trial}");
            assert!(max_abs(&(&f - f.adjoint())) < 1e-14);
            assert!(purity(&f) <= purity(rho.elements()) + 0.05, "trial {trial}");
        }
    }

    #[test]
    fn safeguarded_step_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let signal = SignalModel::new(0.4 * PI);
        let noise = NoiseModel::adaptive(0.5);
        for trial in 0..30 {
            let d = 2 + trial % 9;
            let samples = random_samples(20, &mut rng);
            let cache = PovmCache::new(&samples, &signal, &noise, cut(d)).unwrap();
            let rho = random_density(d, 1, &mut rng);
            let next = mle_step(&rho, &cache).unwrap();
            next.validate().unwrap();
            assert!(
                log_likelihood(&next, &cache).unwrap()
                    >= log_likelihood(&rho, &cache).unwrap() - 1e-12
            );
        }
    }

    #[test]
    fn vacuum_data_gives_identity_z() {
        let signal = SignalModel::new(0.45 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let ds = sample_dataset(&TargetStateSpec::Vacuum, &signal, &noise, 10_000, 21).unwrap();
        let cache = PovmCache::new(&ds.samples, &signal, &noise, cut(10)).unwrap();
        let z = z_operator(&DensityMatrix::vacuum(cut(10)), &cache).unwrap();
        // High Fock rows weight tails that few samples reach; only the low block is tight.
        let block = z.view((0, 0), (4, 4)).into_owned();
        let dev = max_abs(&(block - CMatrix::identity(4, 4)));
        assert!(dev < 0.05, "{dev}");
        assert!((DensityMatrix::vacuum(cut(10)).expectation(&z) - re(1.0)).norm() < 1e-12);
    }

    #[test]
    fn profile_width_follows_noise() {
        // Eigenvalue-weight profile is a Gaussian of sd sigma cos / sin in lambda.
        let basis = QuadratureBasis::new(cut(160));
        let theta = PI / 3.0;
        for sigma in [1.0, 0.7, 0.5] {
            let profile = spectral_profile(
                &basis,
                0.2,
                0.0,
                &SignalModel::new(theta),
                &NoiseModel::adaptive(sigma),
            )
            .unwrap();
            let lam = &basis.eigenvalues;
            // Weight each eigenvalue by its local spacing so the sum approximates an integral.
            let w: Vec<f64> = (0..lam.len())
                .map(|k| {
                    let lo = if k == 0 {
                        lam[1] - lam[0]
                    } else {
                        lam[k] - lam[k - 1]
                    };
                    let hi = if k + 1 == lam.len() {
                        lo
                    } else {
                        lam[k + 1] - lam[k]
                    };
                    profile[k] * 0.5 * (lo + hi)
                })
                .collect();
            let total: f64 = w.iter().sum();
            let mean = w.iter().zip(lam).map(|(w, l)| w * l).sum::<f64>() / total;
            let var = w
                .iter()
                .zip(lam)
                .map(|(w, l)| w * (l - mean).powi(2))
                .sum::<f64>()
                / total;
            let expect = (sigma / theta.tan()).powi(2);
            assert!(
                (var / expect - 1.0).abs() < 0.05,
                "sigma {sigma}: {var} vs {expect}"
            );
        }
    }

    #[test]
    fn vacuum_reconstruction() {
        let signal = SignalModel::new(0.49 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let ds = sample_dataset(&TargetStateSpec::Vacuum, &signal, &noise, 10_000, 2).unwrap();
        let cfg = ReconstructionConfig::with_cutoff(cut(12));
        let rep = report_of(reconstruct(&ds.samples, &signal, &noise, &cfg)).unwrap();
        let f =
            crate::fock::fidelity(&crate::fock::PureState::vacuum(cut(12)), &rep.rho_pred).unwrap();
        assert!(f > 0.99, "{f}");
        rep.rho_pred.validate().unwrap();
        assert!(rep
            .loglik_trace
            .windows(2)
            .all(|w| w[1].1 >= w[0].1 - LOGLIK_TOL));
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let signal = SignalModel::new(0.3 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let ds = sample_dataset(&TargetStateSpec::Fock { n: 1 }, &signal, &noise, 1500, 3).unwrap();
        let cfg = ReconstructionConfig {
            max_iter: 40,
            ..ReconstructionConfig::with_cutoff(cut(8))
        };
        let run = |t| {
            parallel::with_threads(Some(t), || {
                let cache = PovmCache::new(&ds.samples, &signal, &noise, cfg.cutoff).unwrap();
                report_of(reconstruct_cached(&cache, &cfg, &mut |_| {})).unwrap()
            })
        };
        let (a, b) = (run(1), run(3));
        assert_eq!(a, b);
    }

    #[test]
    fn report_json_round_trip() {
        let signal = SignalModel::new(0.3 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let ds = sample_dataset(&TargetStateSpec::Vacuum, &signal, &noise, 300, 3).unwrap();
        let cfg = ReconstructionConfig {
            max_iter: 5,
            ..ReconstructionConfig::with_cutoff(cut(5))
        };
        let r = reconstruct(&ds.samples, &signal, &noise, &cfg);
        let Err(Error::NotConverged(rep)) = r else {
            panic!("expected NotConverged")
        };
        assert_eq!(rep.iterations, 5);
        let budget = reconstruct(
            &ds.samples,
            &signal,
            &noise,
            &ReconstructionConfig::budget(cut(5), 5),
        )
        .unwrap();
        assert_eq!(budget, *rep);
        assert!(!rep.converged);
        let text = serde_json::to_string(&rep).unwrap();
        let back: ReconstructionReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, *rep);
    }

    #[test]
    fn matrix_encoding_is_bit_exact() {
        let m = CMatrix::from_fn(3, 3, |r, c| {
            Complex64::new(r as f64 + 0.1, -(c as f64) / 3.0)
        });
        let text = encode_matrix(&m);
        assert_eq!(decode_matrix(&text, 3).unwrap(), m);
        assert!(matches!(decode_matrix(&text, 4), Err(Error::Schema { .. })));
    }

    #[test]
    fn config_defaults_and_validation() {
        let c: ReconstructionConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, ReconstructionConfig::default());
        assert_eq!((c.tol, c.max_iter, c.cutoff.dim()), (1e-8, 5000, 40));
        let bad = ReconstructionConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ReconstructionConfig>(r#"{"tolerance": 1}"#).is_err());
        let b: ReconstructionConfig = serde_json::from_str(
            r#"{"cutoff": 12, "max_iter": 20, "stop_rule": "iteration_budget"}"#,
        )
        .unwrap();
        assert_eq!(
            b,
            ReconstructionConfig::budget(FockCutoff::new(12).unwrap(), 20)
        );
    }

    #[test]
    fn degenerate_theta() {
        let noise = NoiseModel::adaptive(1.0);
        for theta in [0.0, FRAC_PI_2] {
            let r = povm_element(0.0, 0.0, &SignalModel::new(theta), &noise, cut(4));
            assert!(matches!(r, Err(Error::DegenerateTheta(_))));
        }
    }

    #[test]
    fn zero_probability_sample_reported() {
        let signal = SignalModel::new(PI / 4.0);
        let noise = NoiseModel::adaptive(1.0);
        let samples = [
            QuadratureSample { a: 0.1, phi: 0.2 },
            QuadratureSample { a: 1e3, phi: 0.2 },
        ];
        let cache = PovmCache::new(&samples, &signal, &noise, cut(6)).unwrap();
        let r = z_operator(&DensityMatrix::vacuum(cut(6)), &cache);
        assert!(matches!(r, Err(Error::ZeroProbabilitySample(1))));
    }

    #[test]
    fn small_cutoff_warns() {
        let spec = TargetStateSpec::SqueezedCoherent {
            alpha: Complex64::new(3.0, 0.0),
            r: 0.0,
            psi: 0.0,
        };
        let signal = SignalModel::new(0.45 * PI);
        let noise = NoiseModel::adaptive(1.0);
        let ds = sample_dataset(&spec, &signal, &noise, 500, 1).unwrap();
        let cfg = ReconstructionConfig {
            max_iter: 50,
            ..ReconstructionConfig::with_cutoff(cut(6))
        };
        let rep = report_of(reconstruct(&ds.samples, &signal, &noise, &cfg)).unwrap();
        assert!(rep.diagnostics.cutoff_warning.is_some());
    }
}
