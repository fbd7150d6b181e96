use thiserror::Error;

/// Failures while reading or validating match data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown stage label {label:?}")]
    UnknownStage { line: usize, label: String },
    #[error("line {line}: goal at minute {minute} exceeds match duration {duration}")]
    MinuteOutOfRange {
        line: usize,
        minute: u32,
        duration: u32,
    },
    #[error("line {line}: duplicate match id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: {stage} matches cannot last {duration} minutes")]
    InvalidDuration {
        line: usize,
        stage: String,
        duration: u32,
    },
    #[error("count view {0} is empty for this dataset")]
    EmptyView(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failures of a statistical routine on otherwise well-formed input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    Empty,
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("exact test infeasible for n = {n}, total = {total} (limits n <= {max_n}, total <= {max_total})")]
    Infeasible {
        n: usize,
        total: u64,
        max_n: usize,
        max_total: u64,
    },
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;
