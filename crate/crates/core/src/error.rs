//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message} at line {line}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("{path}: non-monotonic timestamp at line {line}")]
    NonMonotonicTimestamp { path: String, line: u64 },

    #[error("{path}: invalid corpus: {message}")]
    InvalidStream { path: String, message: String },

    #[error("{stream}: label {timestamp} does not match any record timestamp")]
    LabelNotFound { stream: String, timestamp: String },

    #[error("{stream}: label {timestamp} falls inside the probationary period")]
    LabelInProbation { stream: String, timestamp: String },

    #[error("labeler set is empty")]
    EmptyLabelerSet,

    #[error("corpus contains no files")]
    EmptyCorpus,

    #[error("duplicate result for file {0}")]
    DuplicateFile(String),

    #[error("no detector result for file {0}")]
    MissingFile(String),

    #[error("anomaly score {value} at record {index} is outside [0, 1]")]
    ScoreOutOfRange { index: usize, value: f64 },

    #[error("detections are not sorted by record index")]
    UnsortedDetections,

    #[error("degenerate corpus: perfect score {perfect} does not exceed null score {null}")]
    DegenerateNormalization { perfect: f64, null: f64 },

    #[error("external detector: {0}")]
    ExternalDetector(String),

    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that mean the input corpus (data files, labels,
    /// windows) failed validation, as opposed to usage or runtime errors.
    pub fn is_corpus_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::NonMonotonicTimestamp { .. }
                | Error::InvalidStream { .. }
                | Error::LabelNotFound { .. }
                | Error::LabelInProbation { .. }
                | Error::EmptyCorpus
        )
    }
}
