use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point ({x}, {y}) lies outside the domain")]
    Domain { x: f64, y: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular input: {0}")]
    Singular(String),

    #[error("factorization broke down at row {row} (pivot {pivot:e})")]
    Factorization { row: usize, pivot: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("spectral gap too small: relative gap {relative_gap:e}")]
    NoSpectralGap { relative_gap: f64 },

    #[error("convexity certificate failed: eigenvalue {worst:e} at node ({i}, {j})")]
    Convexity { worst: f64, i: usize, j: usize },

    #[error("time step rejected: {0}")]
    StepSize(String),

    #[error("integrator step failure at x = {x}: local error {error:e}")]
    StepFailure { x: f64, error: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Domain { .. } => 1,
            Error::Convexity { .. } => 3,
            _ => 2,
        }
    }
}
