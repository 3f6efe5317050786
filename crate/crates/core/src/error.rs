use thiserror::Error;

/// Errors raised across the ratio-estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate scale: all pairwise distances are zero")]
    DegenerateScale,

    #[error("non-finite kernel value at entry ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("non-finite value: {0}")]
    NonFiniteValue(String),

    #[error("too few points: need at least 2, got {0}")]
    TooFewPoints(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rank collapse: no eigenvalue above the floor")]
    RankCollapse,

    #[error("covariance is not positive definite")]
    NotPositiveDefinite,

    #[error("acceptance rate {0} is below the minimum")]
    ZeroAcceptance(f64),

    #[error("all resampling weights are degenerate")]
    AllWeightsDegenerate,

    #[error("simulation budget {budget} is smaller than the population {population}")]
    BudgetTooSmall { budget: usize, population: usize },

    #[error("too few values: need at least 2, got {0}")]
    TooFewValues(usize),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
