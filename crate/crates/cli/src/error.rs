use thiserror::Error;

/// Failures mapped to process exit codes: usage 1, validation 2, runtime 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Model and simulation failures during execution are runtime errors unless
/// they reflect bad inputs.
impl From<outbreak_core::models::ModelError> for CliError {
    fn from(e: outbreak_core::models::ModelError) -> Self {
        use outbreak_core::models::ModelError as M;
        match &e {
            M::ProvenanceOverlap { .. }
            | M::KExceedsTrainSize { .. }
            | M::UnknownModel(_)
            | M::EmbeddingDimMismatch { .. }
            | M::BadCheckpoint(_) => CliError::Validation(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
