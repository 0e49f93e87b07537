//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid construction parameters (unsupported kind/dimension, bad exponent, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Structural mismatch in a config file, with a JSON pointer to the offending field.
    #[error("schema error at {pointer}: {message}")]
    Schema { pointer: String, message: String },

    /// A value is out of its admissible range.
    #[error("value error: {0}")]
    Value(String),

    /// A field was used at an incompatible truncation level.
    #[error("level error: {0}")]
    Level(String),

    /// Two fields do not belong to the same discrete space.
    #[error("mismatched spaces: {0}")]
    SpaceMismatch(String),

    /// An operator was applied on a space kind it does not support.
    #[error("kind error: {0}")]
    Kind(String),

    /// A time step failed to converge; carries the last residual norm.
    #[error("step {step} failed: Newton residual {residual:.3e} after {iterations} iterations")]
    Step {
        step: usize,
        residual: f64,
        iterations: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn value(msg: impl Into<String>) -> Self {
        Error::Value(msg.into())
    }
}
