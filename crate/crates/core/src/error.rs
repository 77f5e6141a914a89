use std::path::PathBuf;

use chrono::NaiveDate;

/// Broad failure classes; the command-line front end maps them to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Data,
    Solver,
    Invariant,
}

#[derive(Debug, thiserror::Error)]
pub enum ArbError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("solver error on {date}: {source}")]
    Solver {
        date: NaiveDate,
        #[source]
        source: arb_milp::MilpError,
    },
    #[error("solver returned status {status} on {date}")]
    SolverStatus {
        date: NaiveDate,
        status: arb_milp::Status,
    },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl ArbError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ArbError::Validation(_) => ErrorKind::Validation,
            ArbError::Data(_) | ArbError::Io { .. } | ArbError::Csv { .. } => ErrorKind::Data,
            ArbError::Solver { .. } | ArbError::SolverStatus { .. } => ErrorKind::Solver,
            ArbError::Invariant(_) => ErrorKind::Invariant,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ArbError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        ArbError::Csv {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = ArbError> = std::result::Result<T, E>;
