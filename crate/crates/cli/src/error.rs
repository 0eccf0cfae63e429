use thiserror::Error;

/// Failure classes of the harness, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<qfl_core::Error> for CliError {
    fn from(e: qfl_core::Error) -> Self {
        use qfl_core::Error as E;
        match e {
            E::Io { .. } | E::Format(_) | E::Truncated { .. } | E::UnsupportedLayout(_) | E::NotFound { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
