use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no rows")]
    NoRows,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` is assigned more than one role")]
    DuplicateRole(String),
    #[error("non-numeric value `{value}` in continuous column `{column}` (row {row})")]
    NonNumeric { column: String, row: usize, value: String },
    #[error("label `{value}` in row {row} is outside the declared classes")]
    UnknownLabel { row: usize, value: String },
    #[error("missing label in row {0}")]
    MissingLabel(usize),
    #[error("category `{value}` is not in the vocabulary of feature `{feature}`")]
    UnknownCategory { feature: String, value: String },
    #[error("column `{0}` is entirely missing")]
    AllMissing(String),
    #[error("missing value in feature `{feature}` (row {row})")]
    MissingValue { feature: String, row: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("class `{0}` has no instances")]
    EmptyClass(String),
    #[error("fold count {k} is invalid for {rows} rows")]
    InvalidFolds { k: usize, rows: usize },
    #[error("non-finite input value {0}")]
    NonFinite(f64),
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("non-finite {term} loss in stage {stage} at epoch {epoch}")]
    NonFiniteLoss { term: &'static str, stage: u8, epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("stage 3 required")]
    StageRequired,
    #[error("prototype {0} has no provenance")]
    MissingProvenance(usize),
    #[error("index {index} out of range (len {len})")]
    OutOfRange { index: usize, len: usize },
    #[error("confusion matrix row for class {0} is empty")]
    EmptyClassRow(usize),
    #[error("every trial failed: {}", .0.join("; "))]
    AllTrialsFailed(alloc::vec::Vec<String>),
}

/// Non-fatal conditions surfaced alongside a result.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum Warning {
    /// Initial bin centers coincided (e.g. a constant feature) and were
    /// spread apart.
    CollapsedCenters(String),
    /// Centers closer than the merge tolerance share one interval.
    MergedCenters(String),
    /// Fewer than two prototypes, so the diversity term is zero.
    DiversityUndefined,
    /// The batch size exceeded the training rows and was clamped.
    BatchClamped { requested: usize, used: usize },
}
