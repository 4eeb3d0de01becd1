use std::path::PathBuf;

use hurst_core::ErrorKind;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] hurst_core::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: line {line}: {msg}")]
    ConfigLine { path: String, line: usize, msg: String },

    #[error("{path}: row {row}: {msg}")]
    DataRow { path: String, row: usize, msg: String },

    #[error("{path}: {msg}")]
    Data { path: String, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("study failed: {0}")]
    Study(String),
}

impl CliError {
    /// 0 success, 2 data, 3 numeric, 4 configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
                ErrorKind::Config => 4,
            },
            CliError::Config(_) | CliError::ConfigLine { .. } => 4,
            CliError::DataRow { .. } | CliError::Data { .. } | CliError::Io { .. } => 2,
            CliError::Study(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
