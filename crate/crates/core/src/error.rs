//! Error type shared by every module of the crate.

use thiserror::Error;

/// Failures raised by the analysis and simulation routines.
///
/// The variants are split so that front ends can map them onto exit codes:
/// [`Error::is_validation`] covers bad user input, everything else is a
/// numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed input: wrong dimensions, non-symmetric matrices, bad specs.
    #[error("validation error: {0}")]
    Validation(String),
    /// Input outside the mathematical domain of the routine (e.g. mu >= L).
    #[error("domain error: {0}")]
    Domain(String),
    /// A scalar parameter outside its documented range.
    #[error("range error: {0}")]
    Range(String),
    /// The Riccati recursion lost positivity of gamma^2 - B'XB.
    #[error("gain exceeded for mode lambda = {lambda}: gamma^2 - B'XB = {margin:.3e} <= 0 (theta is at or past the finiteness boundary)")]
    GainExceeded { lambda: f64, margin: f64 },
    /// An iterative method ran out of iterations or failed its post-check.
    #[error("{what} did not converge after {iterations} iterations (last residual {residual:.3e}){hint}")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
        hint: String,
    },
    /// Any other numerical breakdown (singular systems, overflow, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Output could not be written.
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_) | Error::Domain(_) | Error::Range(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
