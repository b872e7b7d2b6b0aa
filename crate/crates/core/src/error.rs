use alloc::string::String;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("unknown trial or group index {0}")]
    UnknownIndex(usize),

    #[error("design matrix is rank deficient: rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },

    #[error("no data rows")]
    EmptyData,

    #[error("{arm} arm has {rows} rows, needs at least {needed}")]
    InsufficientArm {
        arm: &'static str,
        rows: usize,
        needed: usize,
    },

    #[error("{observations} observations cannot determine {parameters} parameters")]
    Underdetermined {
        observations: usize,
        parameters: usize,
    },

    #[error("propensity {0} is not in (0, 1)")]
    Domain(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}
