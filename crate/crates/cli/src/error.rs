use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{op}: {source}")]
    Numerical {
        op: &'static str,
        source: nonmarkov::Error,
    },

    #[error("{0}")]
    CheckFailed(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::CheckFailed(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

/// Parameter-level failures count as config errors, everything else as
/// numerical failures of operation `op`.
pub fn core_error(op: &'static str, e: nonmarkov::Error) -> CliError {
    use nonmarkov::Error as E;
    match e {
        E::Domain(_) | E::InvalidModel(_) | E::Unsupported(_) | E::GridTooCoarse { .. } => {
            CliError::Config(format!("{op}: {e}"))
        }
        _ => CliError::Numerical { op, source: e },
    }
}
