//! Error type shared across the crate.

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A data row could not be interpreted. `row` is the 1-based line in the input.
    #[error("row {row}: {message}")]
    ParseRow { row: u64, message: String },

    #[error("duplicate date {date} with conflicting values {first} and {second}")]
    DuplicateDate {
        date: NaiveDate,
        first: f64,
        second: f64,
    },

    #[error("input table contains no data rows")]
    EmptyTable,

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("series has no usable (non-missing) values")]
    AllMissing,

    /// GSBB found a block start with no admissible source position.
    #[error(
        "no source block starts at a position congruent to {target} mod {period} \
         within [0, {max_start}]; use a smaller block length or period"
    )]
    NoCandidateBlocks {
        target: usize,
        period: usize,
        max_start: usize,
    },

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("treatment band has zero mean width; the width ratio is infinite")]
    ZeroWidthBand,

    #[error("replicate counts differ across components: {0} vs {1}")]
    ReplicateMismatch(usize, usize),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
