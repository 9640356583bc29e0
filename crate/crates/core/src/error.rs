use std::path::PathBuf;

use thiserror::Error;

/// Result alias used across the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by the command-line front end to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vectors are indexed by different type vocabularies")]
    VocabularyMismatch,

    #[error("similarity is undefined for a zero-norm vector")]
    UndefinedSimilarity,

    #[error("{what} component {index} is out of range: {value}")]
    OutOfRange {
        what: String,
        index: usize,
        value: f64,
    },

    #[error("training diverged at epoch {epoch}, step {step}: loss is {loss}")]
    Divergence { epoch: usize, step: usize, loss: f64 },

    #[error("unsupported checkpoint version {found} (expected {expected})")]
    CheckpointVersion { expected: u32, found: u32 },

    #[error("corrupted checkpoint: {0}")]
    CheckpointCorrupt(String),

    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),

    #[error("invalid rule on line {line}: {message}")]
    InvalidRule { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            line,
            message: message.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::Divergence { .. } | Error::UndefinedSimilarity => ErrorClass::Numeric,
            _ => ErrorClass::Data,
        }
    }
}
