//! Crate-wide error type and exit-code mapping for the CLI.

use thiserror::Error;

/// Everything that can go wrong across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input failed validation (probabilities, sizes, grids, file contents).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two related objects have incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative routine exhausted its iteration budget.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },

    /// The nonlinear solver could not locate a valid solution.
    #[error("solver failed: {0}")]
    SolverFailed(String),

    /// A parameter lies outside its mathematically valid range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// The requested enumeration exceeds the configured cap.
    #[error("resource cap exceeded: need {needed} items, cap is {cap}; use Monte-Carlo for this blocklength")]
    CapExceeded { needed: u128, cap: u64 },

    /// A degenerate configuration for which the quantity is undefined.
    #[error("degenerate case: {0}")]
    Degenerate(String),

    /// Underlying file-system failure.
    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input document.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the `mhtest` binary: 2 for bad input,
    /// 3 for numeric failures, 4 for resource caps.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::DimensionMismatch(_)
            | Error::Io(_)
            | Error::Parse(_) => 2,
            Error::NoConvergence { .. }
            | Error::SolverFailed(_)
            | Error::OutOfRange(_)
            | Error::Degenerate(_) => 3,
            Error::CapExceeded { .. } => 4,
        }
    }
}
