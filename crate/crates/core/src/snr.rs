//! Waveguide signal model: mixing angle, heating budget, optimal boundary
//! reflectivity and output noise for a magneto-optical Fabry-Perot slab.
//!
//! Everything is SI internally. JSON uses unit-suffixed field names.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J s (exact SI value).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact SI value).
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s (exact SI value).
pub const C_LIGHT: f64 = 299_792_458.0;

/// Denominators below this raise [`Error::ResonanceDivergence`].
pub const DIVERGENCE_GUARD: f64 = 1e-12;
/// Above this the linearised signal is only an order-of-magnitude estimate.
pub const WEAK_SIGNAL_LIMIT: f64 = 0.5;
/// Heating criterion: fraction of one magnon quantum per pulse.
pub const HEATING_FRACTION: f64 = 0.1;

const EPS_R_TOL: f64 = 1e-9;

pub fn deg_per_cm_to_rad_per_m(x: f64) -> f64 {
    x.to_radians() * 100.0
}

pub fn rad_per_m_to_deg_per_cm(x: f64) -> f64 {
    (x / 100.0).to_degrees()
}

/// Angular frequency of light with the given vacuum wavelength.
pub fn omega_from_wavelength(lambda: f64) -> f64 {
    2.0 * PI * C_LIGHT / lambda
}

/// `x` reduced to (-pi, pi].
fn reduce_phase(x: f64) -> f64 {
    x - 2.0 * PI * (x / (2.0 * PI)).round()
}

/// `|1 - r e^{i phase}|`, written so it stays accurate near `r = 1, phase = 0`.
fn resonance_modulus(r: f64, phase: f64) -> f64 {
    resonance_modulus_gap(1.0 - r, r, phase)
}

/// As [`resonance_modulus`] with `1 - r` supplied by the caller.
fn resonance_modulus_gap(gap: f64, r: f64, phase: f64) -> f64 {
    let s = (0.5 * phase).sin();
    (gap * gap + 4.0 * r * s * s).sqrt()
}

fn resonance_factor(r: f64, phase: f64) -> Result<Complex64> {
    let modulus = resonance_modulus(r, phase);
    if modulus < DIVERGENCE_GUARD {
        return Err(Error::ResonanceDivergence(modulus));
    }
    Ok(Complex64::new(1.0, 0.0) - Complex64::from_polar(r, phase))
}

/// Optical and magnetic constants of the slab, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MaterialJson", into = "MaterialJson")]
pub struct MaterialParams {
    /// Faraday rotation, rad/m.
    pub theta_f: f64,
    /// Cotton-Mouton ellipticity, rad/m.
    pub theta_c: f64,
    /// Optical absorption, 1/m.
    pub alpha_abs: f64,
    pub mu_ref: f64,
    pub eps_r: f64,
    /// Saturation magnetization, A/m.
    pub m_s: f64,
    /// Gyromagnetic ratio magnitude, rad/(s T).
    pub gamma_g: f64,
    /// Specific heat, J/(kg K).
    pub c_v: f64,
    /// Mass density, kg/m^3.
    pub mu_den: f64,
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialJson {
    theta_F_deg_per_cm: f64,
    #[serde(default)]
    theta_C_deg_per_cm: f64,
    alpha_abs_per_cm: f64,
    mu_ref: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_r: Option<f64>,
    M_s_A_per_m: f64,
    gamma_G_rad_per_s_per_T: f64,
    C_V_J_per_kg_per_K: f64,
    mu_den_g_per_cm3: f64,
}

impl TryFrom<MaterialJson> for MaterialParams {
    type Error = Error;

    fn try_from(j: MaterialJson) -> Result<Self> {
        let m = MaterialParams {
            theta_f: deg_per_cm_to_rad_per_m(j.theta_F_deg_per_cm),
            theta_c: deg_per_cm_to_rad_per_m(j.theta_C_deg_per_cm),
            alpha_abs: j.alpha_abs_per_cm * 100.0,
            mu_ref: j.mu_ref,
            eps_r: j.eps_r.unwrap_or(j.mu_ref * j.mu_ref),
            m_s: j.M_s_A_per_m,
            gamma_g: j.gamma_G_rad_per_s_per_T,
            c_v: j.C_V_J_per_kg_per_K,
            mu_den: j.mu_den_g_per_cm3 * 1000.0,
        };
        m.validate()?;
        Ok(m)
    }
}

impl From<MaterialParams> for MaterialJson {
    fn from(m: MaterialParams) -> Self {
        MaterialJson {
            theta_F_deg_per_cm: rad_per_m_to_deg_per_cm(m.theta_f),
            theta_C_deg_per_cm: rad_per_m_to_deg_per_cm(m.theta_c),
            alpha_abs_per_cm: m.alpha_abs / 100.0,
            mu_ref: m.mu_ref,
            eps_r: Some(m.eps_r),
            M_s_A_per_m: m.m_s,
            gamma_G_rad_per_s_per_T: m.gamma_g,
            C_V_J_per_kg_per_K: m.c_v,
            mu_den_g_per_cm3: m.mu_den / 1000.0,
        }
    }
}

impl MaterialParams {
    /// Cryogenic YIG at 1.5 um. Absorption is 1% of the room-temperature
    /// upper bound of 0.03/cm.
    pub fn yig_infrared() -> Self {
        Self::yig(200.0, 1e-2 * 0.03)
    }

    /// Cryogenic YIG at 550 nm, absorption 1% of 200/cm.
    pub fn yig_visible() -> Self {
        Self::yig(3000.0, 1e-2 * 200.0)
    }

    fn yig(theta_f_deg_per_cm: f64, alpha_per_cm: f64) -> Self {
        let mu_ref = 2.2;
        MaterialParams {
            theta_f: deg_per_cm_to_rad_per_m(theta_f_deg_per_cm),
            theta_c: 0.0,
            alpha_abs: alpha_per_cm * 100.0,
            mu_ref,
            eps_r: mu_ref * mu_ref,
            m_s: 1.4e5,
            gamma_g: 1.76e11,
            c_v: 590.0,
            mu_den: 5000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha_abs", self.alpha_abs),
            ("mu_ref", self.mu_ref),
            ("eps_r", self.eps_r),
            ("M_s", self.m_s),
            ("gamma_G", self.gamma_g),
            ("C_V", self.c_v),
            ("mu_den", self.mu_den),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [("theta_F", self.theta_f), ("theta_C", self.theta_c)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if (self.eps_r - self.mu_ref * self.mu_ref).abs() > EPS_R_TOL * self.eps_r {
            return Err(Error::InvalidParameter(format!(
                "eps_r {} inconsistent with mu_ref^2 = {}",
                self.eps_r,
                self.mu_ref * self.mu_ref
            )));
        }
        Ok(())
    }

    pub fn magneto_optic(&self) -> f64 {
        self.theta_f + self.theta_c
    }
}

/// How the input frequency is placed relative to the cavity modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resonance {
    /// Use `omega_in` as given.
    #[default]
    None,
    /// Shift `omega_in` to the nearest `k_in l = 2 n pi`.
    Input,
    /// Shift `omega_in` so the scattered light satisfies `(k_in + k_m) l = 2 n pi`.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioJson", into = "ScenarioJson")]
pub struct WaveguideScenario {
    pub material: MaterialParams,
    /// Length, m.
    pub l: f64,
    /// Boundary reflectivity.
    pub rho: f64,
    /// Requested input angular frequency, rad/s; see [`Resonance`].
    pub omega_in: f64,
    /// Magnon angular frequency, rad/s.
    pub omega_m: f64,
    /// Pulse length, s.
    pub t_pul: f64,
    /// Magnet volume, m^3.
    pub v_mag: f64,
    /// Input power, W.
    pub p_in: Option<f64>,
    pub resonance: Resonance,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaterialSource {
    Preset(String),
    Params(MaterialParams),
}

#[allow(non_snake_case)]
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioJson {
    material: MaterialSource,
    l_um: f64,
    rho: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda_in_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    omega_in_rad_per_s: Option<f64>,
    #[serde(default = "default_omega_m")]
    omega_m_rad_per_s: f64,
    #[serde(default = "default_t_pul_ns")]
    T_pul_ns: f64,
    #[serde(default = "default_v_mag_um3")]
    V_mag_um3: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    P_in_W: Option<f64>,
    #[serde(default)]
    resonance: Resonance,
}

fn default_omega_m() -> f64 {
    DEFAULT_OMEGA_M
}

fn default_t_pul_ns() -> f64 {
    1000.0
}

fn default_v_mag_um3() -> f64 {
    1000.0
}

/// 2 pi x 5 GHz.
pub const DEFAULT_OMEGA_M: f64 = 2.0 * PI * 5e9;

pub fn material_preset(name: &str) -> Result<(MaterialParams, f64)> {
    match name {
        "yig_infrared" => Ok((MaterialParams::yig_infrared(), 1.5e-6)),
        "yig_visible" => Ok((MaterialParams::yig_visible(), 550e-9)),
        other => Err(Error::InvalidParameter(format!(
            "unknown material preset {other:?} (expected yig_infrared or yig_visible)"
        ))),
    }
}

impl TryFrom<ScenarioJson> for WaveguideScenario {
    type Error = Error;

    fn try_from(j: ScenarioJson) -> Result<Self> {
        let (material, preset_lambda) = match j.material {
            MaterialSource::Preset(name) => {
                let (m, lambda) = material_preset(&name)?;
                (m, Some(lambda))
            }
            MaterialSource::Params(m) => (m, None),
        };
        let omega_in = match (j.lambda_in_nm, j.omega_in_rad_per_s) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParameter(
                    "give lambda_in_nm or omega_in_rad_per_s, not both".into(),
                ))
            }
            (Some(nm), None) => omega_from_wavelength(nm * 1e-9),
            (None, Some(w)) => w,
            (None, None) => match preset_lambda {
                Some(lambda) => omega_from_wavelength(lambda),
                None => {
                    return Err(Error::InvalidParameter(
                        "missing lambda_in_nm or omega_in_rad_per_s".into(),
                    ))
                }
            },
        };
        let s = WaveguideScenario {
            material,
            l: j.l_um * 1e-6,
            rho: j.rho,
            omega_in,
            omega_m: j.omega_m_rad_per_s,
            t_pul: j.T_pul_ns * 1e-9,
            v_mag: j.V_mag_um3 * 1e-18,
            p_in: j.P_in_W,
            resonance: j.resonance,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<WaveguideScenario> for ScenarioJson {
    fn from(s: WaveguideScenario) -> Self {
        ScenarioJson {
            material: MaterialSource::Params(s.material),
            l_um: s.l * 1e6,
            rho: s.rho,
            lambda_in_nm: None,
            omega_in_rad_per_s: Some(s.omega_in),
            omega_m_rad_per_s: s.omega_m,
            T_pul_ns: s.t_pul * 1e9,
            V_mag_um3: s.v_mag * 1e18,
            P_in_W: s.p_in,
            resonance: s.resonance,
        }
    }
}

/// Source of the travelling amplitude inside the slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// Largest amplitude allowed by the heating criterion.
    HeatingBudget,
    /// Given `A_trav`, in sqrt(photons / m).
    Travelling(f64),
}

impl WaveguideScenario {
    /// Preset slab with the given length and reflectivity, input on resonance.
    pub fn yig_infrared(l: f64, rho: f64) -> Self {
        Self::preset("yig_infrared", l, rho)
    }

    pub fn yig_visible(l: f64, rho: f64) -> Self {
        Self::preset("yig_visible", l, rho)
    }

    fn preset(name: &str, l: f64, rho: f64) -> Self {
        let (material, lambda) = material_preset(name).expect("known preset");
        WaveguideScenario {
            material,
            l,
            rho,
            omega_in: omega_from_wavelength(lambda),
            omega_m: DEFAULT_OMEGA_M,
            t_pul: 1e-6,
            v_mag: 1e-15,
            p_in: None,
            resonance: Resonance::Input,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.rho.is_finite() && (0.0..1.0).contains(&self.rho)) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        for (name, v) in [
            ("l", self.l),
            ("omega_in", self.omega_in),
            ("omega_m", self.omega_m),
            ("T_pul", self.t_pul),
            ("V_mag", self.v_mag),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if let Some(p) = self.p_in {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "P_in must be non-negative, got {p}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_rho(self, rho: f64) -> Self {
        WaveguideScenario { rho, ..self }
    }

    pub fn with_length(self, l: f64) -> Self {
        WaveguideScenario { l, ..self }
    }

    /// Speed of light in the slab.
    pub fn v(&self) -> f64 {
        C_LIGHT / self.material.mu_ref
    }

    /// Boundary transmittivity from `mu_ref tau^2 + rho^2 = 1`.
    pub fn tau(&self) -> f64 {
        ((1.0 - self.rho * self.rho) / self.material.mu_ref).sqrt()
    }

    /// Single-pass amplitude attenuation.
    pub fn gamma(&self) -> f64 {
        (-0.5 * self.material.alpha_abs * self.l).exp()
    }

    /// `1 - Gamma` without cancellation.
    fn one_minus_gamma(&self) -> f64 {
        -(-0.5 * self.material.alpha_abs * self.l).exp_m1()
    }

    /// `1 - Gamma^2` without cancellation.
    fn one_minus_gamma2(&self) -> f64 {
        -(-self.material.alpha_abs * self.l).exp_m1()
    }

    /// `k_m l`.
    pub fn magnon_phase(&self) -> f64 {
        self.omega_m * self.l / self.v()
    }

    /// `k_in l` reduced to (-pi, pi], after any resonance shift.
    pub fn input_phase(&self) -> f64 {
        match self.resonance {
            Resonance::None => reduce_phase(self.omega_in * self.l / self.v()),
            Resonance::Input => 0.0,
            Resonance::Output => -reduce_phase(self.magnon_phase()),
        }
    }

    /// Input frequency actually used, after any resonance shift.
    pub fn effective_omega_in(&self) -> f64 {
        let raw = self.omega_in * self.l / self.v();
        let n = match self.resonance {
            Resonance::None => return self.omega_in,
            Resonance::Input => (raw / (2.0 * PI)).round(),
            Resonance::Output => ((raw + self.magnon_phase()) / (2.0 * PI)).round(),
        }
        .max(1.0);
        let phase = 2.0 * PI * n + self.input_phase();
        phase * self.v() / self.l
    }

    /// `k_out l` reduced, with `k_out = k_in + omega_m / v`.
    pub fn output_phase(&self) -> f64 {
        reduce_phase(self.input_phase() + self.magnon_phase())
    }

    /// Zero-point magnetization fluctuation `sqrt(gamma hbar M_s / 2 V)`.
    pub fn m_zpf(&self) -> f64 {
        (self.material.gamma_g * HBAR * self.material.m_s / (2.0 * self.v_mag)).sqrt()
    }
}

/// `c A_trav^2 T_pul / V_mag` at the heating limit, in 1/m^3 * m/s * s.
pub fn heating_budget_amplitude(s: &WaveguideScenario) -> f64 {
    let m = &s.material;
    HEATING_FRACTION * s.omega_m * m.mu_ref * m.c_v * m.mu_den
        / (K_B * m.alpha_abs * s.effective_omega_in() * s.l)
}

/// Travelling amplitude at the heating limit for this pulse and volume.
pub fn budget_travelling_amplitude(s: &WaveguideScenario) -> f64 {
    (heating_budget_amplitude(s) * s.v_mag / (C_LIGHT * s.t_pul)).sqrt()
}

/// Signal mixing angle `theta = |S|`.
pub fn theta_full(s: &WaveguideScenario, amplitude: Amplitude) -> Result<f64> {
    s.validate()?;
    let a = match amplitude {
        Amplitude::HeatingBudget => budget_travelling_amplitude(s),
        Amplitude::Travelling(a) => a,
    };
    let gamma = s.gamma();
    let r = s.rho * s.rho * gamma * gamma;
    let den = resonance_modulus(r, 2.0 * s.output_phase());
    if den < DIVERGENCE_GUARD {
        return Err(Error::ResonanceDivergence(den));
    }
    let m = &s.material;
    let drive = C_LIGHT * a * a * s.t_pul / s.v_mag;
    Ok((m.gamma_g * HBAR / (2.0 * m.m_s) * drive).sqrt()
        * 0.5
        * m.magneto_optic()
        * gamma
        * s.l
        * s.tau()
        / den)
}

/// Reflectivity maximizing `theta` with the input on resonance.
pub fn optimal_reflectivity(s: &WaveguideScenario) -> f64 {
    let gamma = s.gamma();
    let g2 = gamma * gamma;
    let x = 2.0 * s.magnon_phase();
    let half = (0.5 * x).sin();
    let root = (s.one_minus_gamma2().powi(2) + 4.0 * g2 * half * half).sqrt();
    let rho2 = 1.0 - root / g2;
    if rho2 > 0.0 {
        rho2.sqrt()
    } else {
        0.0
    }
}

/// Length-independent estimate of `theta` at the optimal reflectivity in the
/// regime `1 - Gamma << omega_m l / v << 1`.
pub fn theta_off_resonance(material: &MaterialParams, omega_in: f64) -> f64 {
    let m = material;
    let prefactor = (m.gamma_g * HBAR * m.c_v * m.mu_den * C_LIGHT / (K_B * m.m_s)).sqrt()
        / (8.0 * 5f64.sqrt());
    prefactor * m.magneto_optic() / (m.alpha_abs * omega_in).sqrt() / m.mu_ref.sqrt()
}

/// Output noise standard deviations `(sigma_s, sigma_b)` for input squeezing
/// `r_in`.
pub fn output_noise_sigma(s: &WaveguideScenario, r_in: f64) -> Result<(f64, f64)> {
    if !(r_in.is_finite() && r_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "r_in must be non-negative, got {r_in}"
        )));
    }
    s.validate()?;
    let gamma = s.gamma();
    let rg = s.rho * gamma;
    let gap = (1.0 - s.rho) + s.rho * s.one_minus_gamma();
    let den = resonance_modulus_gap(gap, rg, s.output_phase()).powi(2);
    // Fraction of the output that is absorber noise, in [0, 1].
    let k = if den > 0.0 {
        (s.one_minus_gamma2() * (1.0 - s.rho) * (1.0 + s.rho) / den).min(1.0)
    } else {
        0.0
    };
    let var = |r: f64| (-r).exp() - (-r).exp_m1() * k;
    Ok((var(r_in).sqrt(), var(-r_in).sqrt()))
}

/// Amplitude of the pump field inside the slab, in sqrt(photons / m).
pub fn intracavity_amplitude(s: &WaveguideScenario) -> Result<Complex64> {
    s.validate()?;
    let p_in = s
        .p_in
        .ok_or_else(|| Error::InvalidParameter("P_in required".into()))?;
    let gamma = s.gamma();
    let den = resonance_factor(s.rho * s.rho * gamma * gamma, 2.0 * s.input_phase())?;
    let drive = (p_in / (HBAR * s.effective_omega_in() * C_LIGHT)).sqrt();
    Ok(Complex64::new(s.material.mu_ref * s.tau() * drive, 0.0) / den)
}

/// Blue-sideband scattering amplitude `G_yx`.
pub fn coupling_g_yx(s: &WaveguideScenario) -> Complex64 {
    let m = &s.material;
    Complex64::new(
        0.0,
        C_LIGHT / m.eps_r.sqrt() * s.m_zpf() / m.m_s * 0.5 * m.magneto_optic(),
    )
}

/// `G_xy`, i.e. `G_yx` with the Faraday term reversed.
pub fn coupling_g_xy(s: &WaveguideScenario) -> Complex64 {
    let m = &s.material;
    Complex64::new(
        0.0,
        C_LIGHT / m.eps_r.sqrt() * s.m_zpf() / m.m_s * 0.5 * (m.theta_c - m.theta_f),
    )
}

fn pump_prefactor(s: &WaveguideScenario) -> Result<Complex64> {
    let p_in = s
        .p_in
        .ok_or_else(|| Error::InvalidParameter("P_in required".into()))?;
    let gamma = s.gamma();
    let phase = s.input_phase();
    let den = resonance_factor(s.rho * s.rho * gamma * gamma, 2.0 * phase)?;
    let drive = (p_in / (HBAR * s.effective_omega_in() * C_LIGHT)).sqrt();
    let num = Complex64::new(0.0, -gamma * s.l / C_LIGHT)
        * (s.material.mu_ref * (1.0 - s.rho * s.rho) * drive);
    Ok(num * Complex64::from_polar(1.0, phase) / den)
}

/// Complex signal amplitude `S` for a given coupling.
pub fn signal_amplitude_s(s: &WaveguideScenario, g_yx: Complex64) -> Result<Complex64> {
    s.validate()?;
    let gamma = s.gamma();
    let den = resonance_factor(s.rho * s.rho * gamma * gamma, 2.0 * s.output_phase())?;
    let out = pump_prefactor(s)? * g_yx / den * (C_LIGHT * s.t_pul).sqrt();
    if out.norm() > WEAK_SIGNAL_LIMIT {
        log::warn!(
            "|S| = {:.3} exceeds {WEAK_SIGNAL_LIMIT}; treat as an estimate",
            out.norm()
        );
    }
    Ok(out)
}

/// Blue and red sideband factors, without the magnon operator.
pub fn sideband_factors(s: &WaveguideScenario) -> Result<(Complex64, Complex64)> {
    s.validate()?;
    let gamma = s.gamma();
    let r = s.rho * s.rho * gamma * gamma;
    let (pin, pm) = (s.input_phase(), s.magnon_phase());
    let blue = coupling_g_yx(s) * Complex64::from_polar(1.0, 0.5 * pm)
        / resonance_factor(r, 2.0 * (pin + pm))?;
    let red = coupling_g_xy(s).conj() * Complex64::from_polar(1.0, -0.5 * pm)
        / resonance_factor(r, 2.0 * (pin - pm))?;
    Ok((blue, red))
}

/// One point of a length sweep at the optimal reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub l: f64,
    pub rho_opt: f64,
    pub theta: f64,
    pub sigma_s: f64,
    pub sigma_b: f64,
}

pub fn length_sweep(base: &WaveguideScenario, lengths: &[f64], r_in: f64) -> Result<Vec<SweepRow>> {
    lengths
        .iter()
        .map(|&l| {
            let s = base.with_length(l);
            let rho_opt = optimal_reflectivity(&s);
            let s = s.with_rho(rho_opt);
            let theta = theta_full(&s, Amplitude::HeatingBudget)?;
            let (sigma_s, sigma_b) = output_noise_sigma(&s, r_in)?;
            Ok(SweepRow {
                l,
                rho_opt,
                theta,
                sigma_s,
                sigma_b,
            })
        })
        .collect()
}

/// `points` lengths spaced logarithmically over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..points)
                .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
                .collect()
        }
    }
}
