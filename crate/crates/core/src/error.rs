use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("side length {side} is not an integer multiple of h = {h}")]
    NonDivisibleSpacing { side: f64, h: f64 },

    #[error("index ({row}, {col}) out of range for a {nrows}x{ncols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("time step {step}: conjugate gradient stalled after {iterations} iterations (relative residual {residual:e})")]
    StepNoConvergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value: {0}")]
    NonFiniteValue(String),

    #[error("singular denominator: v + mu2 = {0:e}")]
    SingularDenominator(f64),

    #[error("non-finite state after step {step}")]
    NonFiniteState { step: usize },

    #[error("wavenumber {0} does not satisfy the zero-flux condition on the domain")]
    InvalidWavenumber(f64),

    #[error("rate input must be strictly positive, got {0}")]
    NonPositiveInput(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidConfig(_) => 2,
            Error::NoConvergence { .. } | Error::StepNoConvergence { .. } => 3,
            _ => 1,
        }
    }
}
