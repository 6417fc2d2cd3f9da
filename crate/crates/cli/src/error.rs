use optisense_core::SimError;
use thiserror::Error;

/// Failure classes with fixed process exit codes.
#[derive(Debug, Clone, Error)]
pub enum CliError {
    #[error("internal error: {0}")]
    Internal(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("fixture error: {0}")]
    Fixture(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => 1,
            CliError::Config(_) => 2,
            CliError::Fixture(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        let msg = e.to_string();
        if e.is_fixture_error() || matches!(e, SimError::UnsupportedLayer(_)) {
            return CliError::Fixture(msg);
        }
        match e {
            SimError::InvalidConfig(_)
            | SimError::MissingConstant(_)
            | SimError::UnsupportedKernelSize(_)
            | SimError::ZeroOutputGeometry(_)
            | SimError::BitWidthOverflow { .. }
            | SimError::GeometryMismatch(_)
            | SimError::ShapeMismatch(_)
            | SimError::InvalidState(_) => CliError::Config(msg),
            _ => CliError::Internal(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
