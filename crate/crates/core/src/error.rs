use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OccupancyError {
    #[error("invalid parameters n={n}, m={m}, d={d}: {reason}")]
    Domain {
        n: u64,
        m: u64,
        d: u64,
        reason: &'static str,
    },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("variance is zero, the standardized count is undefined")]
    ZeroVariance,
    #[error("mean is zero, the size-biased law is undefined")]
    ZeroMean,
    #[error("rational mode limited to n <= {max_n}, m <= {max_m} (got n={n}, m={m}); use float mode")]
    BudgetExceeded { n: u64, m: u64, max_n: u64, max_m: u64 },
    #[error("occupancy counts imply n={implied}, expected n={expected}")]
    InconsistentCounts { implied: u64, expected: u64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: u64, got: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = OccupancyError> = std::result::Result<T, E>;
