use std::path::Path;

use thiserror::Error;

/// Failure of a CLI run, mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] rcmf_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            context: path.display().to_string(),
            source,
        }
    }

    /// 2 usage, 3 domain or invalid parameters, 4 io, 5 invariant violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(rcmf_core::Error::Invariant(_)) => 5,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let context = "csv output".to_string();
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io { context, source },
            other => CliError::Io {
                context,
                source: std::io::Error::other(format!("{other:?}")),
            },
        }
    }
}
