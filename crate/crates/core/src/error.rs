use std::path::PathBuf;

use thiserror::Error;

/// Failures while reading or validating a graph bundle.
///
/// Every variant maps to a stable code (see [`DataError::code`]) so tooling
/// can tell a missing file from a count mismatch without parsing messages.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing bundle file {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("malformed {file}: {reason}")]
    Malformed { file: &'static str, reason: String },

    #[error("{what}: expected {expected}, found {found}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what}: index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("split {split}: node {node} appears in both {first} and {second}")]
    OverlappingSplit {
        split: usize,
        node: usize,
        first: &'static str,
        second: &'static str,
    },
}

impl DataError {
    pub fn code(&self) -> &'static str {
        match self {
            DataError::MissingFile { .. } => "missing-file",
            DataError::Malformed { .. } => "malformed",
            DataError::CountMismatch { .. } => "count-mismatch",
            DataError::IndexOutOfRange { .. } => "index-out-of-range",
            DataError::OverlappingSplit { .. } => "overlapping-split",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied inconsistent shapes, ids or configuration.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested computation would exceed a configured memory cap.
    #[error("resource limit: {0}")]
    Resource(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
