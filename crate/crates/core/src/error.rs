use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("entry {index} = {value:e} is not strictly positive")]
    NotInterior { index: usize, value: f64 },

    #[error("entries sum to {sum}, not 1")]
    NotNormalized { sum: f64 },

    #[error("tangent vector entries sum to {sum:e}, not 0")]
    NotTangent { sum: f64 },

    #[error("alphabet size {0} is below the minimum of 2")]
    TooSmall(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a certified fixed point: dual residual {residual:e} exceeds {tol:e}")]
    NotFixedPoint { residual: f64, tol: f64 },

    #[error("state left the interior at step {step} (t = {time})")]
    PositivityLoss { step: usize, time: f64 },

    #[error("free energy increased by {increase:e} at t = {time} (allowed {allowed:e})")]
    LyapunovViolation { time: f64, increase: f64, allowed: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("decay fit rejected: {0}")]
    FitRejected(String),

    #[error("degenerate regime: {0}")]
    Degenerate(String),

    #[error("self-test failed: {0}")]
    SelfTest(String),
}

pub type Result<T> = std::result::Result<T, Error>;
