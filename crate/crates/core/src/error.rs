use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("insufficient sample for lag {lag} with n = {n}")]
    InsufficientSample { lag: usize, n: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("stationarity violated: alpha + beta = {0}")]
    StationarityViolated(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("likelihood overflow")]
    LikelihoodOverflow,
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("unstable bootstrap: {failed} of {total} replicate refits failed")]
    UnstableBootstrap { failed: usize, total: usize },
    #[error("config error: {0}")]
    Config(String),
    #[error("grid too large: {cells} cells exceeds limit of {limit}")]
    GridTooLarge { cells: u128, limit: u128 },
}

pub type Result<T> = std::result::Result<T, Error>;
