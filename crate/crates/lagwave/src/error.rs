use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("singular tridiagonal system: |pivot| = {pivot:e} at row {row}")]
    SingularSystem { row: usize, pivot: f64 },

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("operator is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("GMRES stagnated: no residual decrease over {cycles} restart cycles (residual {residual:e})")]
    Stagnation { cycles: usize, residual: f64 },

    #[error("harmonics must be presented in order: expected m = {expected}, got {got}")]
    OutOfOrderHarmonic { expected: usize, got: usize },

    #[error("malformed raster file: {0}")]
    RasterFormat(String),

    #[error("raster payload too short: expected {expected} values, got {got}")]
    RasterShortPayload { expected: usize, got: usize },

    #[error("raster contains nonpositive value {value} for parameter {param}")]
    RasterNonpositive { param: String, value: f64 },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
