//! Error type shared across the crate.
//!
//! Variants are grouped by how the CLI reports them: configuration and
//! shape problems exit with code 1, data problems with code 2, and
//! numerical failures (NaN/Inf blow-ups) with code 3.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaitError {
    /// Invalid configuration or API misuse (bad flag values, unsupported
    /// combinations such as AGE extraction from an attention-free model).
    #[error("config error: {0}")]
    Config(String),

    /// Tensor/vector dimension disagreement.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Non-finite values or a diverging computation.
    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl GaitError {
    /// Process exit code the CLI uses for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            GaitError::Config(_) | GaitError::Shape(_) => 1,
            GaitError::Data(_) | GaitError::Io(_) => 2,
            GaitError::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, GaitError>;
