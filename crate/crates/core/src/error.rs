use thiserror::Error;

use crate::trace::ConvergenceTrace;

pub type Result<T, E = SolverError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SolverError {
    /// Inputs with incompatible shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Non-finite entries, non-positive power and similar input problems.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A point outside the open domain of the barrier (R or K not positive definite,
    /// or a per-antenna slack that is not positive).
    #[error("outside barrier domain: {0}")]
    Domain(String),

    #[error("KKT matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularKkt { condition: f64 },

    #[error("linear solve inaccurate: relative backward error {backward_error:.3e}")]
    InaccurateSolve { backward_error: f64 },

    #[error("line search stalled: step {step:.3e} below minimum, residual {residual:.6e}")]
    LineSearch { step: f64, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The inner Newton solve did not reach its tolerance. The partial trace is kept
    /// so callers can still write it out.
    #[error("Newton solve did not converge at t = {t:.3e} (residual {residual:.6e}): {reason}")]
    NotConverged {
        t: f64,
        residual: f64,
        reason: String,
        trace: Box<ConvergenceTrace>,
    },

    #[error("target rate unattainable within bracket: Cs({power}) = {rate} < {target}")]
    BracketInvalid { power: f64, rate: f64, target: f64 },
}

impl SolverError {
    /// Partial trace carried by a non-converged solve, if any.
    pub fn trace(&self) -> Option<&ConvergenceTrace> {
        match self {
            SolverError::NotConverged { trace, .. } => Some(trace),
            _ => None,
        }
    }
}
