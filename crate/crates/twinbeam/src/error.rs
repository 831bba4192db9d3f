use std::path::PathBuf;

use twinbeam_core::Error as CoreError;

/// Errors surfaced by the command layer, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("numerical tolerance: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Data(_) | CliError::Parse { .. } | CliError::Io { .. } => 3,
            CliError::Numerical(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Domain { .. } => CliError::Validation(msg),
            CoreError::TailTolerance { .. } | CoreError::UndefinedMarker(_) => {
                CliError::Numerical(msg)
            }
            CoreError::NoiseDominated { .. }
            | CoreError::InconsistentData(_)
            | CoreError::InsufficientData { .. } => CliError::Data(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
