use thiserror::Error;

/// Failure of a CLI action, each with its exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("resource cap: {0}")]
    ResourceCap(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error("{0}")]
    Failed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::ResourceCap(_) => 3,
            CliError::ReplayMismatch(_) => 4,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<y00_core::Error> for CliError {
    fn from(e: y00_core::Error) -> Self {
        use y00_core::Error as E;
        match e {
            E::WorkCap { .. } => CliError::ResourceCap(e.to_string()),
            E::Domain(_) | E::Config(_) | E::Io(_) => CliError::Validation(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}
