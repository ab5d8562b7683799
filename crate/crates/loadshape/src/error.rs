use std::path::PathBuf;

use loadshape_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad arguments or malformed input files.
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Runtime(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Invalid(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for problems with what the user supplied, 1 for failures while
    /// running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 1,
            CliError::Core(e) => match e {
                CoreError::NoConvergence { .. }
                | CoreError::DegenerateScale
                | CoreError::ZeroDenominator
                | CoreError::TooLong { .. } => 1,
                _ => 2,
            },
        }
    }
}
