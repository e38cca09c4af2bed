use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(String, String),

    /// A frame became non-finite; the step size is too large for the data.
    #[error("numerical blowup at t = {t}")]
    Blowup { t: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("horizon search exhausted: T0 = {t0} exceeds cap, worst endpoint error {worst:.3e}")]
    HorizonExhausted { t0: f64, worst: f64 },

    /// The certificate found costs more than the allowed budget 𝒱(z) + γ/2.
    #[error("certificate cost {cost:.6e} exceeds budget {budget:.6e}")]
    BudgetExceeded { cost: f64, budget: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bad snapshot: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
