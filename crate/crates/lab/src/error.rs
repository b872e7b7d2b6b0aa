use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {message}")]
    Io {
        path: PathBuf,
        message: String,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl LabError {
    /// 0 success, 2 validation, 3 I/O, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Validation(_) | LabError::Parse { .. } => 2,
            LabError::Io { .. } => 3,
            LabError::Numerical(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        LabError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        LabError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

impl From<deconfound_core::Error> for LabError {
    fn from(e: deconfound_core::Error) -> Self {
        use deconfound_core::Error as E;
        match e {
            E::Invalid(_)
            | E::OutOfRange { .. }
            | E::UnknownIndex(_)
            | E::Domain(_)
            | E::Precondition(_) => LabError::Validation(e.to_string()),
            E::NonFinite(_)
            | E::RankDeficient { .. }
            | E::EmptyData
            | E::InsufficientArm { .. }
            | E::Underdetermined { .. }
            | E::NumericalFailure(_) => LabError::Numerical(e.to_string()),
        }
    }
}
