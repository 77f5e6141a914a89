use std::path::{Path, PathBuf};

use arb_core::{ArbError, ErrorKind};
use arb_milp::MilpError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
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
    #[error(transparent)]
    Core(#[from] ArbError),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        if let CliError::Usage(_) = self {
            return "usage";
        }
        match self.exit_code() {
            1 => "validation",
            2 => "data",
            3 => "solver",
            _ => "invariant",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Io { .. } | CliError::Csv { .. } => 2,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Data => 2,
                ErrorKind::Solver => 3,
                ErrorKind::Invariant => 4,
            },
            CliError::Milp(e) => match e {
                MilpError::MpsParse { .. } | MilpError::Io { .. } => 2,
                MilpError::InvalidInstance(_) | MilpError::NameTooLong(_) => 1,
                _ => 3,
            },
            CliError::Check(_) => 4,
        }
    }

    /// `error kind=<kind> code=<n>: <message>` on one line.
    pub fn line(&self) -> String {
        let mut msg = self.to_string();
        let mut src = std::error::Error::source(self);
        while let Some(e) = src {
            let s = e.to_string();
            if !msg.contains(&s) {
                msg.push_str(": ");
                msg.push_str(&s);
            }
            src = e.source();
        }
        let msg = msg.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error kind={} code={}: {msg}", self.kind(), self.exit_code())
    }
}
