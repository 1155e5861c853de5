use std::path::PathBuf;

use thiserror::Error;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad caller input: invalid arguments, shapes or hyperparameters.
    Invalid,
    /// Input files that cannot be read or do not follow their format.
    Data,
    /// Non-finite values during training or scoring.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },

    #[error("question {question_id}: empty {field} after tokenization")]
    EmptyText {
        question_id: String,
        field: &'static str,
    },

    #[error("question {question_id} appears in both {first} and {second} splits")]
    SplitOverlap {
        question_id: String,
        first: &'static str,
        second: &'static str,
    },

    #[error("split {0} is empty")]
    EmptySplit(&'static str),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("cosine similarity of a zero vector")]
    ZeroVector,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: {reason}")]
    Diverged {
        epoch: usize,
        step: usize,
        reason: String,
    },

    #[error("no group has a positive candidate; {0} is undefined")]
    NoPositive(&'static str),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Malformed { .. }
            | Error::EmptyText { .. }
            | Error::SplitOverlap { .. }
            | Error::EmptySplit(_)
            | Error::DimMismatch { .. }
            | Error::NoPositive(_)
            | Error::Checkpoint(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::NonFinite(_) | Error::Diverged { .. } => ErrorKind::Numeric,
            Error::Shape(_) | Error::ZeroVector | Error::InvalidArgument(_) => ErrorKind::Invalid,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
