use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid physical system: {0}")]
    InvalidSystem(String),

    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),

    #[error("time {t} outside waveform domain [{start}, {end}]")]
    Domain { t: f64, start: f64, end: f64 },

    #[error("{what}: achieved error estimate {achieved:e} exceeds requested {requested:e}")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },

    #[error("index {index} outside healthy block of size {healthy}")]
    Truncation { index: usize, healthy: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidSystem(_)
                | Error::InvalidWaveform(_)
                | Error::InvalidArgument(_)
        )
    }
}
