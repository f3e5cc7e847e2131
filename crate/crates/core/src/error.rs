use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("parameters must be normalized to unit edge length (ell = {0})")]
    NotNormalized(f64),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("nonlinearity is not KPP-admissible: {0}")]
    InadmissibleNonlinearity(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("implicit operator is not strictly diagonally dominant at row {row}")]
    NotDiagonallyDominant { row: usize },

    #[error("collocation diagonal {diagonal:e} below threshold {threshold:e}")]
    IllConditioned { diagonal: f64, threshold: f64 },

    #[error("blow-up at t = {time}: |value| = {value:e} exceeds {limit:e}")]
    BlowUp { time: f64, value: f64, limit: f64 },

    #[error("a-priori bound violated at t = {time} ({what}): {value:e} outside [{lower:e}, {upper:e}]")]
    BoundViolation {
        time: f64,
        what: &'static str,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("no sign change of g - G found up to lambda = {lambda_hi:e}")]
    NoSignChange { lambda_hi: f64 },

    #[error("post-check failed: {0}")]
    PostCheck(String),

    #[error("minimum of the speed curve sits at the scan endpoint (argument {at:e})")]
    EndpointMinimum { at: f64 },

    #[error("no threshold crossing: {0}")]
    NoCrossing(&'static str),

    #[error("fit needs at least {needed} samples, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("degenerate least-squares fit (abscissae do not vary)")]
    DegenerateFit,
}
