use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("MPS parse error at line {line}: {msg}")]
    MpsParse { line: usize, msg: String },
    #[error("name `{0}` exceeds 8 characters; use free-format MPS")]
    NameTooLong(String),
    #[error("backend executable `{0}` not found")]
    BackendMissing(String),
    #[error("backend exited with status {code:?}: {stderr}")]
    BackendFailed { code: Option<i32>, stderr: String },
    #[error("cannot parse backend solution {path}: {msg}")]
    SolutionParse { path: PathBuf, msg: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl MilpError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MilpError::Io {
            path: path.into(),
            source,
        }
    }
}
