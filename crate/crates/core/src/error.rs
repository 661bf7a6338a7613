use thiserror::Error;

/// Errors raised anywhere in the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix is not hermitian (max |A - A^dagger| = {0:e})")]
    NotHermitian(f64),

    #[error("invalid tensor space: {0}")]
    InvalidSpace(String),

    #[error("partial trace needs at least one kept factor")]
    EmptyKeep,

    #[error("state vector has zero norm")]
    ZeroVector,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),

    #[error("zero detuning for transition {0}")]
    ZeroDetuning(&'static str),

    #[error("infeasible level-shift balance: {0}")]
    Infeasible(String),

    #[error("level shifts not balanced (residual {residual:e} exceeds {limit:e})")]
    UnbalancedShifts { residual: f64, limit: f64 },

    #[error("rotating frame inconsistent: {0}")]
    FrameInconsistency(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("step size underflow at t = {t} (h = {h:e}); the problem is too stiff for the explicit integrator")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("degenerate steady state: {0}")]
    DegenerateSteadyState(String),

    #[error("not converged: {0}")]
    NotConverged(String),

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
