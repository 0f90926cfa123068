use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unparseable or invalid configuration, or bad command-line arguments.
    /// Reported before anything is written.
    #[error("config error: {0}")]
    Config(String),

    /// One or more checks failed; outputs were still written.
    #[error("check failed: {0}")]
    Check(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mishbench_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use mishbench_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Check(_) => EXIT_CHECK_FAILED,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(E::Io { .. } | E::Format { .. } | E::Length { .. }) => EXIT_IO,
            CliError::Core(E::Argument(_) | E::Spec(_) | E::Domain(_)) => EXIT_CONFIG,
            CliError::Core(_) => EXIT_CHECK_FAILED,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(PathBuf::from("<csv>"), std::io::Error::other(e))
    }
}

pub type CliResult<T> = Result<T, CliError>;
