//! Crate-wide error type.

/// Errors produced by solvers, environments and experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structurally inconsistent setup (mismatched dimensions, missing stop
    /// criteria, invalid partition, ...). Detected before any work is done.
    #[error("configuration error: {0}")]
    Config(String),

    /// A single argument is outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Fixed-point iteration exhausted its budget. With a discount below one
    /// this indicates a broken operator rather than a hard problem.
    #[error("no convergence after {iters} iterations (last residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
