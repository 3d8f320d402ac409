use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("vector has (near) zero L2 norm")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite value at position {index}")]
    NonFiniteValue { index: usize },
    #[error("embedding dimension must be positive")]
    ZeroDimension,

    #[error("bad magic bytes {found:?}, expected \"S3EM\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported S3EM format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("malformed label block: {0}")]
    MalformedLabels(String),
    #[error("malformed text record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("field `{0}` must not be empty")]
    EmptyField(&'static str),
    #[error("network error talking to {endpoint}: {message}")]
    Network { endpoint: String, message: String },
    #[error("could not parse LLM response: {reason}")]
    Parse { reason: String, raw_body: String },
    #[error("rate limited by {endpoint} (retry after {retry_after_secs}s)")]
    RateLimited {
        endpoint: String,
        retry_after_secs: u64,
    },
    #[error("lexicon cache miss for prompt {0:?} and no endpoint configured")]
    CacheMiss(String),
    #[error("invalid json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("embedding set is empty")]
    EmptySet,
    #[error("semantic space is empty")]
    EmptySpace,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no embeddings available for class {class_id} ({name})")]
    MissingEmbeddings { class_id: usize, name: String },
    #[error("class {class_id} ({name}) has {texts} texts but {embeddings} embeddings")]
    TextEmbeddingMismatch {
        class_id: usize,
        name: String,
        texts: usize,
        embeddings: usize,
    },
    #[error("core component of class {class_id} ({name}) is empty")]
    EmptyCore { class_id: usize, name: String },
    #[error("catalog has no classes")]
    EmptyCatalog,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("query label {0:?} is not a class index")]
    BadQueryLabel(String),
    #[error("query set is empty")]
    EmptyQuerySet,
    #[error("numerical overflow in {0}")]
    NumericalOverflow(&'static str),
    #[error("invalid rate {0}: must lie in [0, 1)")]
    InvalidRate(f64),
    #[error("episode has {actual} views, {expected} requested")]
    TooFewViews { expected: usize, actual: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
