use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("infeasible decoder cells: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Model(#[from] mnac::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema { .. } | CliError::Model(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}
