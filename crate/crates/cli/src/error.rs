use std::path::{Path, PathBuf};

use snpair_core::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Numerical(SimError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::Format { .. } => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        CliError::Format { path: path.to_path_buf(), message: message.into() }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            // bad user input that only the solver can detect
            SimError::InvalidGrid(m) | SimError::InvalidParameter(m) => CliError::Config(m),
            other => CliError::Numerical(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
