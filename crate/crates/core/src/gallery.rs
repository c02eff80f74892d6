//! Target magnon states: vacuum, Fock states, squeezed coherent states, cat
//! states and the classical two-component mixture.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TruncationWarning};
use crate::fock::{
    displacement_operator, squeezing_operator, CVector, DensityMatrix, FockCutoff, PureState,
};

const DISCARD_TOL: f64 = 1e-6;

/// Complex numbers as `[re, im]` in JSON.
pub(crate) mod complex_pair {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Declarative description of a target state.
///
/// JSON form, e.g. `{"variant": "cat", "alpha": [2.7, 1.3], "psi": -1.7}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetStateSpec {
    Vacuum,
    Fock {
        n: usize,
    },
    SqueezedCoherent {
        #[serde(with = "complex_pair")]
        alpha: Complex64,
        r: f64,
        psi: f64,
    },
    Cat {
        #[serde(with = "complex_pair")]
        alpha: Complex64,
        psi: f64,
    },
    ClassicalMixture {
        #[serde(with = "complex_pair")]
        alpha: Complex64,
    },
}

impl TargetStateSpec {
    pub fn is_pure(&self) -> bool {
        !matches!(self, TargetStateSpec::ClassicalMixture { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetStateSpec::Vacuum => "vacuum",
            TargetStateSpec::Fock { .. } => "fock",
            TargetStateSpec::SqueezedCoherent { .. } => "squeezed_coherent",
            TargetStateSpec::Cat { .. } => "cat",
            TargetStateSpec::ClassicalMixture { .. } => "classical_mixture",
        }
    }

    /// The mixture `(|a><a| + |-a><-a|)/2` sharing the cat amplitude.
    pub fn classical_partner(&self) -> Option<TargetStateSpec> {
        match *self {
            TargetStateSpec::Cat { alpha, .. } => Some(TargetStateSpec::ClassicalMixture { alpha }),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |z: Complex64| z.re.is_finite() && z.im.is_finite();
        let ok = match *self {
            TargetStateSpec::Vacuum | TargetStateSpec::Fock { .. } => true,
            TargetStateSpec::SqueezedCoherent { alpha, r, psi } => {
                finite(alpha) && r.is_finite() && r >= 0.0 && psi.is_finite()
            }
            TargetStateSpec::Cat { alpha, psi } => finite(alpha) && psi.is_finite(),
            TargetStateSpec::ClassicalMixture { alpha } => finite(alpha),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "non-finite or out-of-range parameters in {self:?}"
            )))
        }
    }

    /// Squeezed coherent target used by the shipped fidelity presets.
    pub fn reference_squeezed_coherent() -> Self {
        TargetStateSpec::SqueezedCoherent {
            alpha: Complex64::new(1.8, -2.4),
            r: 1.5f64.ln(),
            psi: 2.7,
        }
    }

    pub fn reference_cat() -> Self {
        TargetStateSpec::Cat {
            alpha: Complex64::new(2.7, 1.3),
            psi: -1.7,
        }
    }
}

/// `1 / sqrt(1 + e^{-2|alpha|^2} cos psi)`.
pub fn cat_normalization(alpha: Complex64, psi: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * alpha.norm_sqr()).exp() * psi.cos()).sqrt()
}

/// Truncates a padded vector to `cutoff`, reporting the discarded norm.
fn truncate(
    v: &CVector,
    cutoff: FockCutoff,
    what: &str,
) -> Result<(PureState, Option<TruncationWarning>)> {
    let d = cutoff.dim();
    let total = v.norm_squared();
    let kept = CVector::from_fn(d, |n, _| v[n]);
    let discarded = (total - kept.norm_squared()).max(0.0) / total;
    let warn = (discarded > DISCARD_TOL).then(|| TruncationWarning {
        what: what.to_string(),
        deviation: discarded,
    });
    Ok((PureState::new(kept)?, warn))
}

/// `D(alpha)|0>` in the padded space.
fn padded_coherent(
    alpha: Complex64,
    cutoff: FockCutoff,
    warnings: &mut Vec<TruncationWarning>,
) -> CVector {
    let (d, w) = displacement_operator(alpha, cutoff.padded());
    warnings.extend(w);
    d.column(0).into_owned()
}

/// Coherent state `D(alpha)|0>` truncated to `cutoff`.
pub fn coherent_state(
    alpha: Complex64,
    cutoff: FockCutoff,
) -> Result<(PureState, Vec<TruncationWarning>)> {
    let mut warnings = Vec::new();
    let v = padded_coherent(alpha, cutoff, &mut warnings);
    let (s, w) = truncate(&v, cutoff, "coherent state")?;
    warnings.extend(w);
    Ok((s, warnings))
}

/// Builds a pure target state, returning any truncation warnings.
pub fn realize_pure_checked(
    spec: &TargetStateSpec,
    cutoff: FockCutoff,
) -> Result<(PureState, Vec<TruncationWarning>)> {
    spec.validate()?;
    let mut warnings = Vec::new();
    let state = match *spec {
        TargetStateSpec::Vacuum => PureState::vacuum(cutoff),
        TargetStateSpec::Fock { n } => PureState::basis(n, cutoff)?,
        TargetStateSpec::SqueezedCoherent { alpha, r, psi } => {
            let big = cutoff.padded();
            let (s, ws) = squeezing_operator(r, psi, big);
            let (dm, wd) = displacement_operator(alpha, big);
            warnings.extend(ws);
            warnings.extend(wd);
            let v = dm * s.column(0);
            let (st, w) = truncate(&v, cutoff, "squeezed coherent state")?;
            warnings.extend(w);
            st
        }
        TargetStateSpec::Cat { alpha, psi } => {
            let plus = padded_coherent(alpha, cutoff, &mut warnings);
            let minus = padded_coherent(-alpha, cutoff, &mut warnings);
            let v = plus + minus * Complex64::from_polar(1.0, psi);
            let (st, w) = truncate(&v, cutoff, "cat state")?;
            warnings.extend(w);
            st
        }
        TargetStateSpec::ClassicalMixture { .. } => return Err(Error::NotPure),
    };
    Ok((state, warnings))
}

/// Builds a pure target state; truncation warnings are logged.
pub fn realize_pure(spec: &TargetStateSpec, cutoff: FockCutoff) -> Result<PureState> {
    let (s, warnings) = realize_pure_checked(spec, cutoff)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(s)
}

pub fn realize_density_checked(
    spec: &TargetStateSpec,
    cutoff: FockCutoff,
) -> Result<(DensityMatrix, Vec<TruncationWarning>)> {
    match *spec {
        TargetStateSpec::ClassicalMixture { alpha } => {
            spec.validate()?;
            let (plus, mut warnings) = coherent_state(alpha, cutoff)?;
            let (minus, w) = coherent_state(-alpha, cutoff)?;
            warnings.extend(w);
            Ok((
                DensityMatrix::mixture(&[(0.5, &plus), (0.5, &minus)])?,
                warnings,
            ))
        }
        _ => {
            let (s, w) = realize_pure_checked(spec, cutoff)?;
            Ok((s.to_density(), w))
        }
    }
}

pub fn realize_density(spec: &TargetStateSpec, cutoff: FockCutoff) -> Result<DensityMatrix> {
    let (rho, warnings) = realize_density_checked(spec, cutoff)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(rho)
}
