//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while ingesting or transforming time-series data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv parse error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("timestamp column '{column}' not found in header")]
    MissingTimestampColumn { column: String },

    #[error("row {row}: unparseable timestamp '{value}'")]
    BadTimestamp { row: usize, value: String },

    #[error("row {row}, column '{column}': non-numeric cell '{value}'")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("duplicate timestamp {timestamp} (rows {first} and {second})")]
    DuplicateTimestamp {
        timestamp: String,
        first: usize,
        second: usize,
    },

    #[error("series is empty")]
    EmptySeries,

    #[error("no rows remain after dropping leading missing values")]
    AllMissing,

    #[error("resample interval must be positive, got {millis} ms")]
    BadInterval { millis: i64 },

    #[error("train fraction must lie in (0, 1), got {fraction}")]
    BadTrainFraction { fraction: f64 },

    #[error("{partition} partition is empty after split")]
    EmptyPartition { partition: &'static str },

    #[error("channel mismatch: expected {expected:?}, got {got:?}")]
    ChannelMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("ragged row {row}: expected {expected} values, got {got}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },

    #[error("row {row}, column '{column}': vote '{value}' is not 0 or 1")]
    BadVote {
        row: usize,
        column: String,
        value: String,
    },

    #[error("model '{model}' missing from {what}")]
    MissingModel { model: String, what: &'static str },
}

/// Errors raised while fitting, scoring, or persisting detectors.
#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("too few rows: need at least {required}, got {got}")]
    TooFewRows { required: usize, got: usize },

    #[error("invalid hyperparameter {name}: {reason}")]
    InvalidHyperparameter { name: &'static str, reason: String },

    #[error("hyperparameter {name}={value} outside the configured sweep range {low}..={high}")]
    OutsideSweepRange {
        name: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("empty hyperparameter grid")]
    EmptyGrid,

    #[error("cross-validation needs at least 2 folds, got {folds}")]
    TooFewFolds { folds: usize },

    #[error("scored series is not on the fitted uniform grid (offset {offset} ms, interval {interval} ms)")]
    OffGrid { offset: i64, interval: i64 },

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("detector file {path}: {reason}")]
    Persist { path: String, reason: String },

    #[error("detector format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
}

/// Errors raised while combining per-model verdicts.
#[derive(Debug, Error)]
pub enum FusionError {
    #[error("label series do not share a timestamp grid: {details}")]
    GridMismatch { details: String },

    #[error("vote matrix needs at least one model")]
    NoModels,

    #[error("vote matrix row at {timestamp} contains no positive vote")]
    AllZeroRow { timestamp: String },

    #[error("vote entry at ({row}, {col}) is {value}; votes must be 0 or 1")]
    NonBinaryVote { row: usize, col: usize, value: f64 },

    #[error("expected {expected} per-model values, got {got}")]
    ModelCountMismatch { expected: usize, got: usize },

    #[error("mae values must be non-negative, got {value} for model '{model}'")]
    NegativeMae { model: String, value: f64 },
}
