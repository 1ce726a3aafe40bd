use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("labels must contain both classes (or every declared class)")]
    DegenerateLabels,

    #[error("input vector has zero variance")]
    ZeroVariance,

    #[error("grid must be strictly ascending")]
    InvalidGrid,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dataset has no task labels")]
    MissingLabels,

    #[error("dataset has no input features")]
    MissingFeatures,

    #[error("{reps} representations cannot be aligned to {concepts} concepts")]
    NotEnoughRepresentations { concepts: usize, reps: usize },

    #[error("intervention policy {policy} does not apply to a {bottleneck} bottleneck")]
    PolicyMismatch {
        policy: &'static str,
        bottleneck: &'static str,
    },

    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("row count mismatch: {left} has {left_rows} rows, {right} has {right_rows}")]
    RowCountMismatch {
        left: PathBuf,
        left_rows: usize,
        right: PathBuf,
        right_rows: usize,
    },

    #[error("{path}: row {row}: concept value {value} is not binary")]
    NonBinaryConcept {
        path: PathBuf,
        row: usize,
        value: String,
    },

    #[error("{path}: row {row}: {reason}")]
    MalformedCell {
        path: PathBuf,
        row: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
