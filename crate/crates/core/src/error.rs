use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
///
/// Variants are grouped by the exit category the command-line driver reports
/// (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("shape mismatch: expected {expected} entries, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("step size underflow after {steps} steps (h = {step:e})")]
    StepUnderflow { steps: usize, step: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("degenerate problem: {0}")]
    Degenerate(String),

    #[error("bracket does not straddle a solution: {0}")]
    Bracket(String),

    #[error("seed generation exhausted its retries: {0}")]
    SeedRetries(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Numerical,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Input => 2,
            ErrorCategory::Numerical => 3,
            ErrorCategory::Io => 4,
        }
    }
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidDomain(_)
            | Error::InvalidParameter { .. }
            | Error::ShapeMismatch { .. }
            | Error::Config { .. }
            | Error::Schema(_) => ErrorCategory::Input,
            Error::Io { .. } | Error::Serde(_) => ErrorCategory::Io,
            _ => ErrorCategory::Numerical,
        }
    }

    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
