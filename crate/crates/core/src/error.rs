use crate::trace::Trace;
use thiserror::Error;

/// Errors raised by problem construction, oracles and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch { context: &'static str, expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The coupling matrix does not have full column rank.
    #[error(
        "coupling matrix is rank deficient (sigma_min = {sigma_min:e}, sigma_max = {sigma_max:e}, \
         rows = {rows}, cols = {cols}); a full column rank coupling is required for linear convergence"
    )]
    RankDeficient {
        sigma_min: f64,
        sigma_max: f64,
        rows: usize,
        cols: usize,
    },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure { what: &'static str, iterations: usize, residual: f64 },

    /// A solver produced non-finite values or its potential blew up.
    /// The trace recorded up to the failure is attached.
    #[error("solver diverged at iteration {iteration}: {reason}")]
    Diverged { iteration: usize, reason: String, trace: Box<Trace> },

    #[error("component index {index} out of range (n = {n})")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("instance document error: {0}")]
    Document(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { context, expected, got });
    }
    Ok(())
}
