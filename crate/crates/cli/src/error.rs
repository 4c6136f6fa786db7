use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config files or input data.
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] hdbo::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The command ran but did not finish its work.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub const EXIT_RUNTIME: i32 = 1;
    pub const EXIT_USAGE: i32 = 2;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Core(e) => match e {
                hdbo::Error::InvalidArgument(_)
                | hdbo::Error::UnknownBenchmark { .. }
                | hdbo::Error::DimensionMismatch { .. } => Self::EXIT_USAGE,
                _ => Self::EXIT_RUNTIME,
            },
            CliError::Io { .. } | CliError::Runtime(_) => Self::EXIT_RUNTIME,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
