use alloc::string::String;

/// Errors produced by the forecasting core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("haversine metric needs (lat, lon) points, got dimension {0}")]
    HaversineDimension(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("zero-magnitude velocity, heading is undefined")]
    ZeroVelocity,
    #[error("index {0} has no predecessor")]
    NoPredecessor(usize),
    #[error("timestamps must be strictly increasing (index {0})")]
    NonIncreasingTime(usize),
    #[error("empty point set")]
    EmptyPointSet,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("point lies outside the grid")]
    OutsideGrid,
    #[error("endpoint lies in an infeasible cell")]
    InfeasibleEndpoint,
    #[error("no feasible path between the endpoints")]
    NoPath,
    #[error(
        "Stage 1: no analogues found (epsilon = {epsilon}, theta = {theta}, horizon = {horizon})"
    )]
    NoAnalogues {
        epsilon: f64,
        theta: f64,
        horizon: f64,
    },
    #[error("Stage 4: no support at step {0}")]
    NoSupport(usize),
    #[error("density support lies entirely in the infeasible region")]
    InfeasibleSupport,
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
