use std::path::PathBuf;

use qtherm_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("incompatible sample cache {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 for configuration problems, 3 for an exhausted
    /// sampling budget, 4 for numerical failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Cache { .. } => 2,
            RunError::Core(e) => match e {
                CoreError::BudgetExceeded { .. } => 3,
                CoreError::InvalidParams(_) | CoreError::LengthMismatch { .. } => 2,
                _ => 4,
            },
            RunError::Io { .. } | RunError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, RunError>;
