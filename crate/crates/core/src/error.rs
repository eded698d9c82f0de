use thiserror::Error;

use crate::protocol::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("non-finite sample at channel {channel} ({label}), sample {sample}")]
    NonFinite {
        channel: usize,
        label: String,
        sample: usize,
    },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("rank-deficient channel covariance: channel {channel} carries no independent signal")]
    RankDeficient { channel: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("infeasible computation: {0}")]
    Infeasible(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Wire(#[from] WireError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error class, used by the command-line harness to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Infeasible,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) => ErrorClass::Config,
            Error::Infeasible(_) | Error::RankDeficient { .. } => ErrorClass::Infeasible,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}
