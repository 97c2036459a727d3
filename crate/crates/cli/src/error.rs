use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;

/// Anything that ends a command with exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("cannot write {}: {message}", path.display())]
    Output { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn input(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Input {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub fn output(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Output {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
