use std::path::PathBuf;

/// Every failure the engine can report. The variant decides the CLI exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: parse error: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("evaluation error on config {config_id}: {msg}")]
    Evaluation { config_id: u64, msg: String },

    #[error("cost model: {0}")]
    Cost(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            Error::Parse { .. } | Error::Validation(_) => 2,
            Error::Evaluation { .. } | Error::Cost(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
