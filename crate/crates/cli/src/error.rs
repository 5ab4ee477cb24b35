use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("cannot access {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Core(#[from] spinlab::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for configuration problems, 3 for numerical failures, 4 for a
    /// regime that does not match the requested analysis.
    pub fn exit_code(&self) -> i32 {
        use spinlab::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(..) => 2,
            CliError::Core(e) => match e {
                E::RegimeMismatch { .. } => 4,
                E::InvalidParams(_)
                | E::Domain { .. }
                | E::SizeLimit { .. }
                | E::ConsistencyImpossible { .. }
                | E::TruncationTooWide { .. } => 2,
                _ => 3,
            },
        }
    }
}
