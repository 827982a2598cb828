use padeopt_core::Error as CoreError;

use crate::formats::FormatError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
    /// The command ran but its outputs failed a check.
    #[error("{0}")]
    CheckFailed(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> CliError {
        CliError::Format(FormatError::Core(e))
    }
}

/// 1: usage or configuration, 2: numerical failure, 3: aborted run.
pub fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidSpec(_)
        | CoreError::InvalidWeight(_)
        | CoreError::InvalidTableau(_)
        | CoreError::InvalidArgument(_)
        | CoreError::GridTooSmall(_)
        | CoreError::Unsupported(_) => 1,
        CoreError::RunAborted { .. } => 3,
        _ => 2,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Format(FormatError::Core(e)) => core_exit_code(e),
            CliError::Format(_) | CliError::Usage(_) => 1,
            CliError::CheckFailed(_) => 2,
        }
    }
}
