use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: label {token:?} is not 0 or 1")]
    BadLabel { row: usize, token: String },

    #[error("row {row}, column {column:?}: cannot parse {token:?} as a number")]
    BadValue {
        row: usize,
        column: String,
        token: String,
    },

    #[error("label column {0:?} not found")]
    MissingLabelColumn(String),

    #[error("every feature column is constant; nothing to train on")]
    NoUsableFeatures,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid band {name:?}: {reason}")]
    InvalidBand { name: String, reason: String },

    #[error("window of {window} samples exceeds recording length {length}")]
    WindowTooLong { window: usize, length: usize },

    #[error("data has zero total variance")]
    ZeroVariance,

    #[error("input matrix has zero norm")]
    ZeroNorm,

    #[error("projection fit diverged at step {step}")]
    Divergence { step: usize },

    #[error("layer {layer} produced no candidate with a finite criterion")]
    NoFiniteCandidate { layer: usize },

    #[error("network integrity: {0}")]
    Integrity(String),

    #[error("model file line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported model format version {0:?}")]
    Version(String),

    #[error("input is missing feature {0:?}")]
    MissingFeature(String),

    #[error("all {0} training restarts failed")]
    AllRestartsFailed(usize),

    #[error("could not draw a non-degenerate task after {0} attempts")]
    DegenerateTask(usize),
}
