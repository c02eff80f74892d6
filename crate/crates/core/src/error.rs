//! Error and warning types shared by every module.

use std::fmt;

use crate::mle::ReconstructionReport;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad classes used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid cutoff: dim must be at least 2, got {0}")]
    InvalidCutoff(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("negative expectation value {0:e}")]
    NegativeExpectation(f64),
    #[error("eigendecomposition did not converge")]
    EigenFailure,
    #[error("state spec is not pure (classical mixture)")]
    NotPure,
    #[error("Fock level {n} outside cutoff {dim}")]
    FockOutOfRange { n: usize, dim: usize },
    #[error("no closed form for this state: {0}")]
    UnsupportedState(String),
    #[error("quadrature failed at a = {a}: error estimate {error:e} above target")]
    QuadratureFailure { a: f64, error: f64 },
    #[error("degenerate mixing angle theta = {0}")]
    DegenerateTheta(f64),
    #[error("sample {0} has vanishing probability under the current state")]
    ZeroProbabilitySample(usize),
    #[error("reconstruction did not converge after {} iterations (last step {:e})", .0.iterations, .0.final_step_norm)]
    NotConverged(Box<ReconstructionReport>),
    #[error("resonance divergence: denominator {0:e}")]
    ResonanceDivergence(f64),
    #[error("{}", SchemaDisplay(.line, .message))]
    Schema {
        line: Option<usize>,
        message: String,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

struct SchemaDisplay<'a>(&'a Option<usize>, &'a String);

impl fmt::Display for SchemaDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, "schema violation at line {line}: {}", self.1),
            None => write!(f, "schema violation: {}", self.1),
        }
    }
}

impl Error {
    pub fn schema(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Schema {
            line,
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) => ErrorClass::Io,
            Error::InvalidCutoff(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::NotPure
            | Error::FockOutOfRange { .. }
            | Error::UnsupportedState(_)
            | Error::Schema { .. }
            | Error::Json(_) => ErrorClass::Config,
            Error::InvalidDensity(_)
            | Error::NegativeExpectation(_)
            | Error::EigenFailure
            | Error::QuadratureFailure { .. }
            | Error::DegenerateTheta(_)
            | Error::ZeroProbabilitySample(_)
            | Error::NotConverged(_)
            | Error::ResonanceDivergence(_) => ErrorClass::Numerical,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidCutoff(_) => "invalid_cutoff",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidDensity(_) => "invalid_density",
            Error::NegativeExpectation(_) => "negative_expectation",
            Error::EigenFailure => "eigen_failure",
            Error::NotPure => "not_pure",
            Error::FockOutOfRange { .. } => "fock_out_of_range",
            Error::UnsupportedState(_) => "unsupported_state",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::DegenerateTheta(_) => "degenerate_theta",
            Error::ZeroProbabilitySample(_) => "zero_probability_sample",
            Error::NotConverged(_) => "not_converged",
            Error::ResonanceDivergence(_) => "resonance_divergence",
            Error::Schema { .. } => "schema",
            Error::Io(_) => "io",
            Error::Json(_) => "schema",
        }
    }
}

/// Raised when a truncated operator or state loses norm to the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationWarning {
    pub what: String,
    pub deviation: f64,
}

impl fmt::Display for TruncationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "truncation: {} (deviation {:e})",
            self.what, self.deviation
        )
    }
}
