use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, got {actual}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },

    #[error("positional encoding needs an even width, got {0}")]
    OddPositionalDim(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {what} `{value}`")]
    UnknownName { what: &'static str, value: String },

    #[error("non-finite cart-pole state at step {step}")]
    NonFiniteState { step: u64 },

    #[error("checkpoint has bad magic bytes")]
    BadMagic,

    #[error("checkpoint header field `{field}`: {reason}")]
    HeaderField { field: String, reason: String },

    #[error("checkpoint payload length mismatch: header says {expected} floats, payload holds {actual_bytes} bytes")]
    PayloadLength { expected: usize, actual_bytes: usize },

    #[error("parameter count mismatch: {label_a} has {count_a} parameters, {label_b} has {count_b}")]
    ParamCountMismatch {
        label_a: String,
        count_a: usize,
        label_b: String,
        count_b: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
