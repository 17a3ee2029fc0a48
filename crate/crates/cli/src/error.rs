use pqs_core::PqsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] PqsError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 config, 3 resource guard, 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(PqsError::ResourceLimit { .. }) => 3,
            CliError::Core(PqsError::EvolutionFailure { .. }) => 4,
            CliError::Core(_) => 2,
            CliError::Io { .. } => 1,
        }
    }
}
