//! Probability densities of the magnon quadrature `p_m`, the optical noise
//! `p_eta` and the measured output quadrature `p_a`, with closed forms for
//! the gallery states and a direct numerical convolution for arbitrary
//! density matrices.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, FockCutoff, QuadratureBasis};
use crate::gallery::{cat_normalization, TargetStateSpec};
use crate::quadrature::integrate;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub(crate) fn gauss(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    INV_SQRT_2PI / var.sqrt() * (-0.5 * d * d / var).exp()
}

/// Optical noise in the output quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseJson", into = "NoiseJson")]
pub struct NoiseModel {
    pub sigma_s: f64,
    pub sigma_b: f64,
    pub psi: f64,
    /// Squeezing axis follows the local-oscillator phase.
    pub adaptive: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseJson {
    sigma_s: f64,
    #[serde(default)]
    sigma_b: Option<f64>,
    #[serde(default)]
    psi_rad: f64,
    #[serde(default = "default_true")]
    adaptive: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<NoiseJson> for NoiseModel {
    type Error = Error;
    fn try_from(j: NoiseJson) -> Result<Self> {
        let n = NoiseModel {
            sigma_s: j.sigma_s,
            sigma_b: j.sigma_b.unwrap_or(1.0 / j.sigma_s),
            psi: j.psi_rad,
            adaptive: j.adaptive,
        };
        n.validate()?;
        Ok(n)
    }
}

impl From<NoiseModel> for NoiseJson {
    fn from(n: NoiseModel) -> Self {
        NoiseJson {
            sigma_s: n.sigma_s,
            sigma_b: Some(n.sigma_b),
            psi_rad: n.psi,
            adaptive: n.adaptive,
        }
    }
}

impl NoiseModel {
    /// Squeezed quadrature aligned with every measurement; `sigma_b = 1/sigma_s`.
    pub fn adaptive(sigma_s: f64) -> Self {
        NoiseModel {
            sigma_s,
            sigma_b: 1.0 / sigma_s,
            psi: 0.0,
            adaptive: true,
        }
    }

    /// Fixed squeezing axis `psi`.
    pub fn fixed(sigma_s: f64, sigma_b: f64, psi: f64) -> Self {
        NoiseModel {
            sigma_s,
            sigma_b,
            psi,
            adaptive: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_s.is_finite()
            && self.sigma_b.is_finite()
            && self.psi.is_finite()
            && self.sigma_s > 0.0
            && self.sigma_b >= self.sigma_s;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "noise requires 0 < sigma_s <= sigma_b, got {self:?}"
            )))
        }
    }

    /// Standard deviation of the noise quadrature at phase `phi`.
    pub fn sigma_phi(&self, phi: f64) -> f64 {
        if self.adaptive {
            return self.sigma_s;
        }
        let (s, c) = (phi - self.psi).sin_cos();
        (self.sigma_b * self.sigma_b * s * s + self.sigma_s * self.sigma_s * c * c).sqrt()
    }
}

/// Mixing of magnon signal into the output: `a = cos(theta) eta + sin(theta) m_{phi - s_phase}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalJson", into = "SignalJson")]
pub struct SignalModel {
    pub theta: f64,
    pub s_phase: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SignalJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta_over_pi: Option<f64>,
    #[serde(default)]
    s_phase_rad: f64,
}

impl TryFrom<SignalJson> for SignalModel {
    type Error = Error;
    fn try_from(j: SignalJson) -> Result<Self> {
        let theta = match (j.theta_rad, j.theta_over_pi) {
            (Some(t), None) => t,
            (None, Some(t)) => t * PI,
            _ => {
                return Err(Error::InvalidParameter(
                    "signal needs exactly one of theta_rad, theta_over_pi".into(),
                ))
            }
        };
        let s = SignalModel {
            theta,
            s_phase: j.s_phase_rad,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<SignalModel> for SignalJson {
    fn from(s: SignalModel) -> Self {
        SignalJson {
            theta_rad: Some(s.theta),
            theta_over_pi: None,
            s_phase_rad: s.s_phase,
        }
    }
}

impl SignalModel {
    pub fn new(theta: f64) -> Self {
        SignalModel {
            theta,
            s_phase: 0.0,
        }
    }

    pub fn from_theta_over_pi(t: f64) -> Self {
        SignalModel::new(t * PI)
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.is_finite()
            && self.s_phase.is_finite()
            && (0.0..=FRAC_PI_2).contains(&self.theta)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "theta must lie in [0, pi/2], got {}",
                self.theta
            )))
        }
    }

    pub fn snr(&self) -> f64 {
        self.theta.tan()
    }

    /// `(sin theta, cos theta)` with the end points snapped to exact values.
    pub(crate) fn sin_cos(&self) -> (f64, f64) {
        if self.theta == 0.0 {
            (0.0, 1.0)
        } else if self.theta == FRAC_PI_2 {
            (1.0, 0.0)
        } else {
            self.theta.sin_cos()
        }
    }
}

/// Hermite functions `psi_n(x)`, `n < out.len()`, normalised for a quadrature
/// with unit vacuum variance.
pub fn hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = (2.0 * PI).powf(-0.25) * (-0.25 * x * x).exp();
    if out.len() > 1 {
        out[1] = x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

fn fock_density(n: usize, m: f64) -> f64 {
    let mut buf = vec![0.0; n + 1];
    hermite_functions(m, &mut buf);
    buf[n] * buf[n]
}

/// `exp(-2|alpha|^2 / (1 + tan^2(theta) / sigma^2))`, the weight of the
/// interference term of a cat state in the output distribution.
pub fn cat_interference_amplitude(alpha: Complex64, theta: f64, sigma: f64) -> f64 {
    let (s, c) = SignalModel::new(theta).sin_cos();
    let cs2 = c * c * sigma * sigma;
    (-2.0 * alpha.norm_sqr() * cs2 / (cs2 + s * s)).exp()
}

/// Closed-form magnon quadrature density.
pub fn p_m(spec: &TargetStateSpec, m: f64, phi: f64) -> Result<f64> {
    let rot = Complex64::from_polar(1.0, -phi);
    Ok(match *spec {
        TargetStateSpec::Vacuum => gauss(m, 0.0, 1.0),
        TargetStateSpec::Fock { n } => fock_density(n, m),
        TargetStateSpec::SqueezedCoherent { alpha, r, psi } => {
            let (s, c) = (phi - psi).sin_cos();
            let var = (-2.0 * r).exp() * c * c + (2.0 * r).exp() * s * s;
            gauss(m, 2.0 * (alpha * rot).re, var)
        }
        TargetStateSpec::ClassicalMixture { alpha } => {
            let mu = 2.0 * (alpha * rot).re;
            0.5 * (gauss(m, mu, 1.0) + gauss(m, -mu, 1.0))
        }
        TargetStateSpec::Cat { alpha, psi } => {
            let y = alpha * rot;
            let n2 = cat_normalization(alpha, psi).powi(2);
            let mu = 2.0 * y.re;
            let cl = 0.5 * (gauss(m, mu, 1.0) + gauss(m, -mu, 1.0));
            let fringe = INV_SQRT_2PI
                * (-0.5 * m * m - 2.0 * y.re * y.re).exp()
                * (2.0 * m * y.im - psi).cos();
            n2 * (cl + fringe)
        }
    })
}

/// Noise quadrature density.
pub fn p_eta(noise: &NoiseModel, eta: f64, phi: f64) -> f64 {
    let s = noise.sigma_phi(phi);
    gauss(eta, 0.0, s * s)
}

/// Closed-form output quadrature density.
pub fn p_a(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    a: f64,
    phi: f64,
) -> Result<f64> {
    Ok(OutputDensity::new(spec, signal, noise, phi)?.eval(a))
}

/// `p_a(., phi)` with everything that does not depend on `a` precomputed.
#[derive(Debug, Clone)]
pub struct OutputDensity {
    kind: OutputKind,
}

#[derive(Debug, Clone)]
enum OutputKind {
    Noise {
        var: f64,
    },
    Magnon {
        spec: TargetStateSpec,
        phim: f64,
        s: f64,
    },
    Gaussian {
        mean: f64,
        var: f64,
    },
    Pair {
        mu: f64,
        var: f64,
    },
    Cat {
        mu: f64,
        var: f64,
        z_im: f64,
        n2: f64,
        amp: f64,
        psi: f64,
    },
    Fock {
        n: usize,
        var: f64,
        gain: f64,
        cond_sd: f64,
        nodes: Vec<(f64, f64)>,
    },
}

impl OutputDensity {
    pub fn new(
        spec: &TargetStateSpec,
        signal: &SignalModel,
        noise: &NoiseModel,
        phi: f64,
    ) -> Result<Self> {
        spec.validate()?;
        let (s, c) = signal.sin_cos();
        let sigma = noise.sigma_phi(phi);
        let phim = phi - signal.s_phase;
        if s == 0.0 {
            return Ok(OutputDensity {
                kind: OutputKind::Noise { var: sigma * sigma },
            });
        }
        if c == 0.0 {
            return Ok(OutputDensity {
                kind: OutputKind::Magnon {
                    spec: *spec,
                    phim,
                    s,
                },
            });
        }
        let nvar = c * c * sigma * sigma;
        let var = nvar + s * s;
        let rot = Complex64::from_polar(1.0, -phim);
        let kind = match *spec {
            TargetStateSpec::Vacuum => OutputKind::Gaussian { mean: 0.0, var },
            TargetStateSpec::Fock { n } => {
                // Gauss-Hermite nodes for E[h_n(m)^2 | a], exact for this degree.
                let basis = QuadratureBasis::new(FockCutoff::new(n + 2)?);
                let nodes = (0..basis.dim())
                    .map(|k| (basis.weights[k], basis.eigenvalues[k]))
                    .collect();
                OutputKind::Fock {
                    n,
                    var,
                    gain: s / var,
                    cond_sd: (nvar / var).sqrt(),
                    nodes,
                }
            }
            TargetStateSpec::SqueezedCoherent { alpha, r, psi } => {
                let (sp, cp) = (phim - psi).sin_cos();
                let vm = (-2.0 * r).exp() * cp * cp + (2.0 * r).exp() * sp * sp;
                OutputKind::Gaussian {
                    mean: 2.0 * s * (alpha * rot).re,
                    var: nvar + s * s * vm,
                }
            }
            TargetStateSpec::ClassicalMixture { alpha } => OutputKind::Pair {
                mu: 2.0 * s * (alpha * rot).re,
                var,
            },
            TargetStateSpec::Cat { alpha, psi } => {
                let y = alpha * rot;
                OutputKind::Cat {
                    mu: 2.0 * s * y.re,
                    var,
                    z_im: 2.0 * s * y.im / var,
                    n2: cat_normalization(alpha, psi).powi(2),
                    amp: cat_interference_amplitude(alpha, signal.theta, sigma),
                    psi,
                }
            }
        };
        Ok(OutputDensity { kind })
    }

    pub fn eval(&self, a: f64) -> f64 {
        match &self.kind {
            OutputKind::Noise { var } => gauss(a, 0.0, *var),
            OutputKind::Magnon { spec, phim, s } => {
                p_m(spec, a / s, *phim).map(|p| p / s).unwrap_or(0.0)
            }
            OutputKind::Gaussian { mean, var } => gauss(a, *mean, *var),
            OutputKind::Pair { mu, var } => 0.5 * (gauss(a, *mu, *var) + gauss(a, -*mu, *var)),
            OutputKind::Cat {
                mu,
                var,
                z_im,
                n2,
                amp,
                psi,
            } => {
                let cl = 0.5 * (gauss(a, *mu, *var) + gauss(a, -*mu, *var));
                let fringe = amp * INV_SQRT_2PI / var.sqrt()
                    * (-(a * a + mu * mu) / (2.0 * var)).exp()
                    * (a * z_im - psi).cos();
                n2 * (cl + fringe)
            }
            OutputKind::Fock {
                n,
                var,
                gain,
                cond_sd,
                nodes,
            } => {
                let n = *n;
                if n == 0 {
                    return gauss(a, 0.0, *var);
                }
                let mut e = 0.0;
                for &(w, x) in nodes {
                    let m = gain * a + cond_sd * x;
                    // Hermite polynomial part h_n = psi_n / psi_0.
                    let (mut h0, mut h1) = (1.0, m);
                    for j in 1..n {
                        let h2 = (m * h1 - (j as f64).sqrt() * h0) / ((j + 1) as f64).sqrt();
                        h0 = h1;
                        h1 = h2;
                    }
                    e += w * h1 * h1;
                }
                gauss(a, 0.0, *var) * e
            }
        }
    }
}

/// Mean and standard deviation of each Gaussian-like lobe of `p_a`, used to
/// choose sampling and integration windows.
pub fn p_a_lobes(
    spec: &TargetStateSpec,
    signal: &SignalModel,
    noise: &NoiseModel,
    phi: f64,
) -> Vec<(f64, f64)> {
    let (s, c) = signal.sin_cos();
    let sigma = noise.sigma_phi(phi);
    let nvar = c * c * sigma * sigma;
    let rot = Complex64::from_polar(1.0, -(phi - signal.s_phase));
    match *spec {
        TargetStateSpec::Vacuum => vec![(0.0, (nvar + s * s).sqrt())],
        TargetStateSpec::Fock { n } => vec![(0.0, (nvar + s * s * (2 * n + 1) as f64).sqrt())],
        TargetStateSpec::SqueezedCoherent { alpha, r, .. } => {
            let vm = (2.0 * r).exp();
            vec![(2.0 * s * (alpha * rot).re, (nvar + s * s * vm).sqrt())]
        }
        TargetStateSpec::Cat { alpha, .. } | TargetStateSpec::ClassicalMixture { alpha } => {
            let mu = 2.0 * s * (alpha * rot).re;
            let sd = (nvar + s * s).sqrt();
            vec![(-mu, sd), (mu, sd)]
        }
    }
}

/// Spectral weights `w_k = <u_k|rho|u_k>` of `m_phi` for a density matrix.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
    /// Eigenvalue gap nearest zero.
    pub spacing: f64,
}

impl SpectralDensity {
    pub fn new(rho: &DensityMatrix, phi: f64) -> Self {
        let basis = QuadratureBasis::new(FockCutoff::new(rho.dim()).expect("density dim >= 2"));
        Self::with_basis(rho, phi, &basis)
    }

    pub fn with_basis(rho: &DensityMatrix, phi: f64, basis: &QuadratureBasis) -> Self {
        let d = basis.dim();
        let r = rho.elements();
        // c_n = e^{i phi n} u_n; weight = c^dag rho c.
        let weights = (0..d)
            .map(|k| {
                let c: Vec<Complex64> = (0..d)
                    .map(|n| Complex64::from_polar(basis.vectors[(n, k)], phi * n as f64))
                    .collect();
                let mut w = Complex64::default();
                for i in 0..d {
                    let mut row = Complex64::default();
                    for j in 0..d {
                        row += r[(i, j)] * c[j];
                    }
                    w += c[i].conj() * row;
                }
                w.re
            })
            .collect();
        SpectralDensity {
            eigenvalues: basis.eigenvalues.clone(),
            weights,
            spacing: basis.central_spacing(),
        }
    }

    pub fn default_width(&self) -> f64 {
        0.8 * self.spacing
    }

    /// Gaussian-smoothed spectral density with kernel width `h`.
    pub fn smoothed(&self, m: f64, h: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * gauss(m, *l, h * h))
            .sum()
    }

    /// Smoothed densities at several widths extrapolated to zero width
    /// (Neville's scheme in `h^2`).
    pub fn extrapolated(&self, m: f64) -> f64 {
        const FACTORS: [f64; 4] = [0.8, 1.0, 1.2, 1.4];
        let xs: Vec<f64> = FACTORS.iter().map(|f| (f * self.spacing).powi(2)).collect();
        let mut p: Vec<f64> = xs.iter().map(|x| self.smoothed(m, x.sqrt())).collect();
        let n = xs.len();
        for level in 1..n {
            for i in 0..n - level {
                let (xi, xj) = (xs[i], xs[i + level]);
                p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
            }
        }
        p[0]
    }
}

/// Smoothed spectral density of `m_phi` with the default kernel width.
pub fn p_m_numeric(rho: &DensityMatrix, m: f64, phi: f64) -> f64 {
    let sd = SpectralDensity::new(rho, phi);
    sd.smoothed(m, sd.default_width())
}

/// Exact quadrature density of a truncated density matrix in terms of Hermite
/// functions: `p(x) = sum_r lambda_r |sum_n psi_n(x) e^{-i phi n} v_{r,n}|^2`.
#[derive(Debug, Clone)]
pub struct QuadratureDensity {
    components: Vec<(f64, Vec<Complex64>)>,
    dim: usize,
    /// Largest quadrature eigenvalue magnitude in this cutoff.
    pub support: f64,
}

impl QuadratureDensity {
    pub fn new(rho: &DensityMatrix, phi: f64) -> Result<Self> {
        let (vals, vecs) = rho.eigen()?;
        let d = rho.dim();
        let top = vals[d - 1].abs().max(1e-300);
        let components = (0..d)
            .filter(|&k| vals[k] > 1e-15 * top)
            .map(|k| {
                let c = (0..d)
                    .map(|n| vecs[(n, k)] * Complex64::from_polar(1.0, -phi * n as f64))
                    .collect();
                (vals[k], c)
            })
            .collect();
        let basis = QuadratureBasis::new(FockCutoff::new(d)?);
        Ok(QuadratureDensity {
            components,
            dim: d,
            support: basis.eigenvalues[d - 1],
        })
    }

    pub fn eval_with(&self, x: f64, buf: &mut [f64]) -> f64 {
        hermite_functions(x, &mut buf[..self.dim]);
        self.components
            .iter()
            .map(|(w, c)| {
                let amp: Complex64 = c.iter().zip(buf.iter()).map(|(ci, h)| ci * h).sum();
                w * amp.norm_sqr()
            })
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut buf = vec![0.0; self.dim];
        self.eval_with(x, &mut buf)
    }
}

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_FAIL: f64 = 1e-7;

/// Direct numerical convolution of the exact quadrature density with the noise
/// density, for one density matrix and phase.
#[derive(Debug, Clone)]
pub struct ConvolutionOracle {
    density: QuadratureDensity,
    signal: SignalModel,
    sigma: f64,
    noise: NoiseModel,
    phi: f64,
}

impl ConvolutionOracle {
    pub fn new(
        rho: &DensityMatrix,
        signal: &SignalModel,
        noise: &NoiseModel,
        phi: f64,
    ) -> Result<Self> {
        Ok(ConvolutionOracle {
            density: QuadratureDensity::new(rho, phi - signal.s_phase)?,
            signal: *signal,
            sigma: noise.sigma_phi(phi),
            noise: *noise,
            phi,
        })
    }

    pub fn eval(&self, a: f64) -> Result<f64> {
        let (s, c) = self.signal.sin_cos();
        if s == 0.0 {
            return Ok(p_eta(&self.noise, a, self.phi));
        }
        if c == 0.0 {
            return Ok(self.density.eval(a / s) / s);
        }
        let l = 6.0 + 2.0 * self.density.support;
        let centre = a / s;
        let width = c * self.sigma / s;
        let lo = (centre - 12.0 * width).max(-l);
        let hi = (centre + 12.0 * width).min(l);
        if hi <= lo {
            return Ok(0.0);
        }
        let nsd = c * self.sigma;
        let mut buf = vec![0.0; self.density.dim];
        let r = integrate(
            |m| self.density.eval_with(m, &mut buf) * gauss(a - s * m, 0.0, nsd * nsd),
            lo,
            hi,
            32,
            ORACLE_TOL,
            4000,
        );
        if r.error > ORACLE_FAIL {
            return Err(Error::QuadratureFailure { a, error: r.error });
        }
        Ok(r.value)
    }
}

/// Output density of an arbitrary density matrix by numerical convolution.
pub fn p_a_oracle(
    rho: &DensityMatrix,
    signal: &SignalModel,
    noise: &NoiseModel,
    a: f64,
    phi: f64,
) -> Result<f64> {
    ConvolutionOracle::new(rho, signal, noise, phi)?.eval(a)
}
