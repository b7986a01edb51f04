use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed {format} file {path:?} at {location}: {reason}")]
    Format {
        path: PathBuf,
        format: &'static str,
        location: String,
        reason: String,
    },

    #[error("training diverged: non-finite loss for class {class} at epoch {epoch}")]
    Diverged { class: usize, epoch: usize },

    #[error("class {class} has no relevant samples; average precision is undefined")]
    NoRelevant { class: usize },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error on {path:?}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json { path: path.into(), source }
    }

    /// Short machine-readable tag, used by the CLI error report.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Format { .. } => "format",
            Error::Diverged { .. } => "diverged",
            Error::NoRelevant { .. } => "no_relevant",
            Error::InsufficientSamples(_) => "insufficient_samples",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }
}
