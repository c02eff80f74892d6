//! Simulation and maximum-likelihood reconstruction of magnon quantum states
//! from noisy optical homodyne data, plus the waveguide signal-to-noise model.

pub mod distributions;
pub mod error;
pub mod fock;
pub mod gallery;
pub mod mle;
pub mod parallel;
pub mod pipeline;
pub mod quadrature;
pub mod sampler;
pub mod snr;

pub use error::{Error, ErrorClass, Result, TruncationWarning};
