use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series is empty")]
    EmptySeries,

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("invalid period {period} for a series of length {n}")]
    InvalidPeriod { period: usize, n: usize },

    #[error("invalid period {period}: must be at least 2")]
    PeriodTooSmall { period: usize },

    #[error("series too short: need more than {needed} samples, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("half-power cutoff is undefined for m = {m} (all-pass filter)")]
    UndefinedCutoff { m: usize },

    #[error("periods must be pairwise distinct; {period} appears more than once")]
    DegenerateSeparation { period: usize },

    #[error("at least 2 resamples are required, got {got}")]
    InsufficientResamples { got: usize },

    #[error("reference band has zero width at t = {index}")]
    DegenerateBand { index: usize },

    #[error("correlation undefined: a series has zero variance")]
    UndefinedCorrelation,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
