use thiserror::Error;

/// Everything that can go wrong inside the solver.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("density has a negative entry {value:e} at index {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("imaginary-time solve did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("no self-bound state exists ({0})")]
    NoBoundState(String),

    #[error("norm drifted to {norm} at t = {t}; reduce the time step")]
    NormBlowup { norm: f64, t: f64 },

    #[error("state is not a product state (second Schmidt eigenvalue {lambda2:e})")]
    NotProductState { lambda2: f64 },

    #[error("singular value decomposition failed: {0}")]
    Svd(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
