use thiserror::Error;
use vsloc::io::FormatError;
use vsloc::landmark::LandmarkError;
use vsloc::sim::SimError;
use vsloc::triplet::LossError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(#[from] FormatError),
    #[error("{0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input(_) => 1,
            CliError::Pipeline(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage error",
            CliError::Input(_) => "input error",
            CliError::Pipeline(_) => "pipeline failure",
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidSpec(_) | SimError::InvalidNoise(_) | SimError::CameraIndex { .. } => {
                CliError::Usage(e.to_string())
            }
            SimError::Placement { .. } | SimError::Landmark(_) => CliError::Pipeline(e.to_string()),
        }
    }
}

impl From<LandmarkError> for CliError {
    fn from(e: LandmarkError) -> Self {
        CliError::Pipeline(e.to_string())
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Pipeline(e.to_string()),
        }
    }
}
