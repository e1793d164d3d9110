use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("non-finite input {0} to the Gaussian tail function")]
    NonFinite(f64),

    #[error("inverse tail function is undefined at p = {0}; need 0 < p < 1")]
    ThresholdUndefined(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("observation contains no samples")]
    EmptyObservation,

    #[error("hypothesis boundary {boundary} outside 1..={max}")]
    BoundaryOutOfRange { boundary: usize, max: usize },

    #[error("{active} active devices exceeds the population of {total}")]
    TooManyActive { active: usize, total: usize },

    #[error("device {id} is not part of a population of {total}")]
    UnknownDevice { id: usize, total: usize },

    #[error("{path}:{line}: {message}")]
    ConfigFile {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("frame-trace is limited to {limit} frames (got {frames}); use the throughput command for long runs")]
    TraceTooLong { frames: u64, limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
