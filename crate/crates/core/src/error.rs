//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration field failed validation. Names the offending field.
    #[error("invalid config: {field}: {reason}")]
    Config { field: &'static str, reason: String },

    /// Geometry construction rejected its inputs.
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// An optimizer or channel routine produced a non-finite value.
    #[error("numerical abort: {0}")]
    Numerical(String),

    /// Malformed input to a channel/precoding routine (bad selection, shape
    /// mismatch, out-of-range index).
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn numerical(msg: impl Into<String>) -> Self {
        SimError::Numerical(msg.into())
    }

    pub fn argument(msg: impl Into<String>) -> Self {
        SimError::Argument(msg.into())
    }
}
