use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("numerical failure in {cell}: {source}")]
    Numerical {
        cell: String,
        #[source]
        source: purity_core::Error,
    },
    #[error("malformed data in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{failed} of {total} sweep cells failed")]
    PartialSweep { failed: usize, total: usize },
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    /// Process exit status: 1 config, 2 numerical or I/O failure, 3 partial sweep.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            HarnessError::PartialSweep { .. } => 3,
            _ => 2,
        }
    }

    pub fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}
