use std::process::ExitCode;

use igpo_core::IgpoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad settings, override or input file; exit status 2.
    #[error("config error: {0}")]
    Config(String),
    /// Failure while running or writing results; exit status 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl From<IgpoError> for CliError {
    fn from(e: IgpoError) -> Self {
        match e {
            IgpoError::Config { .. } | IgpoError::NoChain { .. } => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
