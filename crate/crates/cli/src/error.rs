use std::path::PathBuf;

use occupancy_core::OccupancyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {reason}")]
    CountsParse { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Model(#[from] OccupancyError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// 2 for bad invocations and unreadable input, 1 for failed computations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::CountsParse { .. } | CliError::Io { .. } => 2,
            CliError::Model(_) | CliError::Output(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
