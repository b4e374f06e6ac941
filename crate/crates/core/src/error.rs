use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad header in {path}: {detail}")]
    VecHeader { path: PathBuf, detail: String },

    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no usable rows in {path}")]
    EmptyTable { path: PathBuf },

    #[error("cannot save an empty table")]
    EmptyVocabulary,

    #[error("invalid token {token:?}: {detail}")]
    InvalidToken { token: String, detail: String },

    #[error("no usable entries in lexicon {path}")]
    EmptyLexicon { path: PathBuf },

    #[error("anchor set is empty after filtering")]
    EmptyAnchorSet,

    #[error("sample size {requested} exceeds anchor count {available}")]
    SampleTooLarge {
        requested: usize,
        available: usize,
    },

    #[error("anchor file {path} does not match the loaded tables: {detail}")]
    AnchorMismatch { path: PathBuf, detail: String },

    #[error("row index {index} out of range for table with {len} rows")]
    RowOutOfRange { index: usize, len: usize },

    #[error("k = {k} outside 1..={max}")]
    KOutOfRange { k: usize, max: usize },

    #[error("unknown weighting scheme {0:?} (expected standard, softmax, or sparsemax)")]
    UnknownScheme(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("star rating {0} outside 1..=5")]
    StarOutOfRange(u8),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("model file {path}: {detail}")]
    Model { path: PathBuf, detail: String },

    #[error("least-squares solve failed: {0}")]
    SolveFailed(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
