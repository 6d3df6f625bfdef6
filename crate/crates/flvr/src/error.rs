use std::path::PathBuf;

use chrono::NaiveDate;

/// Errors produced by the library.
///
/// Variants are grouped by origin: data ingestion, series construction,
/// estimation, hedging and testing. The CLI maps these onto exit codes, so
/// keep the data/numerics distinction intact when adding variants.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path} line {line}: cannot parse {field} {value:?}")]
    Parse {
        path: PathBuf,
        line: u64,
        field: &'static str,
        value: String,
    },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("duplicate observation date {0}")]
    DuplicateDate(NaiveDate),

    #[error("rate {rate} on {date} outside the sane range [0, {max})")]
    RateOutOfRange {
        date: NaiveDate,
        rate: f64,
        max: f64,
    },

    #[error("savings-account factor has nonpositive {part} on {date} (rate {rate})")]
    NonpositiveFactor {
        date: NaiveDate,
        rate: f64,
        part: &'static str,
    },

    #[error("no common dates between the two series")]
    EmptyIntersection,

    #[error("degenerate time axis: all observation times equal")]
    DegenerateTimeAxis,

    #[error("invalid fit window: {0}")]
    InvalidWindow(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid contract: {0}")]
    InvalidContract(String),

    #[error("hedge failed at step {step}: {message}")]
    HedgeFailed { step: usize, message: String },

    #[error("panel is empty for the requested window and terms")]
    EmptyPanel,

    #[error("contract {id} ({start} -> {maturity}) failed: {source}")]
    ContractFailed {
        id: usize,
        start: NaiveDate,
        maturity: NaiveDate,
        #[source]
        source: Box<Error>,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
}
