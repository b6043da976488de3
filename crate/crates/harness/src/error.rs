use maser_core::dynamics::DynamicsError;
use maser_core::formats::FormatError;
use maser_core::pulse::PulseError;
use maser_core::resonator::ResonatorError;
use maser_core::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error("no shot with id {0}")]
    UnknownShot(u64),
}

impl BenchError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Whether the failure came from the numerics rather than from the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Self::Dynamics(e) => matches!(
                e,
                DynamicsError::IntegrationFailure { .. } | DynamicsError::NonPhysicalState { .. }
            ),
            Self::Spectral(_) => true,
            Self::Pulse(e) => matches!(e, PulseError::InsufficientCycles { .. }),
            _ => false,
        }
    }
}

impl From<toml::de::Error> for BenchError {
    fn from(e: toml::de::Error) -> Self {
        Self::Config(e.to_string())
    }
}
