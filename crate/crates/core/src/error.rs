use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("window has zero volume")]
    EmptyWindow,
    #[error("invalid subgroup: {0}")]
    InvalidSubgroup(String),
    #[error("parameter `{name}` out of range: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("buffer {buffer} is smaller than the required reach {required}")]
    InsufficientBuffer { buffer: f64, required: f64 },
    #[error("box escapes the observed region: {0}")]
    BoxOutsideWindow(String),
    #[error("test function support touches the buffer zone")]
    SupportOutsideWindow,
    #[error("no samples supplied")]
    NoSamples,
    #[error("no interior points remain after applying the margin")]
    NoInteriorPoints,
    #[error("empty configuration")]
    EmptyConfiguration,
    #[error("too few replicates: need at least {needed}, got {got}")]
    TooFewReplicates { needed: usize, got: usize },
    #[error("fidi samples use different box lists")]
    MismatchedBoxes,
    #[error("star schedule violates its budget: sum {sum} >= epsilon {epsilon}")]
    BudgetViolated { sum: f64, epsilon: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
