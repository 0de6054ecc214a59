use thiserror::Error;

/// Errors raised by the bound, simulation and estimation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("outcome {outcome} has total probability {total:e}, below the representable floor")]
    DegenerateDistribution { outcome: usize, total: f64 },

    #[error("second moment sum c_l * theta_l^2 vanishes; F_max is undefined")]
    ZeroSecondMoment,

    #[error("RPE requires T to be a power of two, got {0}")]
    RpeRequiresPowerOfTwo(f64),

    #[error("protocol {0} has no linear cost form t_total = gamma * N * T")]
    NoLinearCostForm(&'static str),

    #[error("Fisher information matrix is singular (condition estimate {condition:e})")]
    SingularFim { condition: f64 },

    #[error("outcome probabilities sum to {sum}, expected 1")]
    NormalizationFailure { sum: f64 },

    #[error("measurement record is empty")]
    EmptyData,

    #[error("schedule mismatch: {0}")]
    ScheduleMismatch(String),

    #[error("no peaks detected in the outcome histogram")]
    NoPeaksDetected,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, QpeError>;

impl From<std::io::Error> for QpeError {
    fn from(e: std::io::Error) -> Self {
        QpeError::Io(e.to_string())
    }
}
