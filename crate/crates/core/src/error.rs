use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, MtflError>;

#[derive(Debug, Error)]
pub enum MtflError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
}

impl MtflError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MtflError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            MtflError::Config(_) | MtflError::InvalidParameter(_) => 1,
            MtflError::Io { .. } | MtflError::Parse { .. } | MtflError::Dimension(_) => 2,
            MtflError::Numerical(_) => 3,
        }
    }
}
