use thiserror::Error;

/// Everything that can go wrong while building or analysing a surface.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CapstabError {
    #[error("profile grid has {0} samples, at least 16 are required")]
    GridTooCoarse(usize),
    #[error("profile grid is not uniform or not increasing near sample {0}")]
    NonUniformGrid(usize),
    #[error("non-positive radius x = {x:e} at non-axis sample {index}")]
    NonPositiveRadius { index: usize, x: f64 },
    #[error("endpoint is on the axis, not on a wall")]
    AxisEndpoint,
    #[error("endpoint is not on a wall")]
    NotAWallEndpoint,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("profile reached the axis at interior arclength s = {s:.6}")]
    IntegrationBlowup { s: f64 },
    #[error("stop condition not reached within arclength {0}")]
    MaxLengthExceeded(f64),
    #[error("shooting found no match: {0}")]
    NoMatch(String),
    #[error("shooting bracket [{lo}, {hi}] is invalid")]
    BracketInvalid { lo: f64, hi: f64 },
    #[error("surface failed validation: {0}")]
    InvalidSurface(String),
    #[error("eigen solver failed: {0}")]
    SolverFailure(String),
    #[error("perturbed surface leaves the domain at t = {t:e}")]
    PerturbationTooLarge { t: f64 },
    #[error("the test function does not change sign")]
    NoSignChange,
    #[error("dimension n = {0} is not supported by this operation")]
    DimensionUnsupported(usize),
    #[error("profile io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, CapstabError>;
