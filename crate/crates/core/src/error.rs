use thiserror::Error;

pub type Result<T, E = FlowError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("state violates the constraint: |C| = {conservation:e}, |H - 1| = {trace:e}")]
    ConstraintViolation { conservation: f64, trace: f64 },

    #[error("Newton projection did not converge after {iterations} iterations (residual {residual:e})")]
    ProjectionFailed { iterations: usize, residual: f64 },

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("constraint drift at eta = {eta}: |C| = {conservation:e}, |H - 1| = {trace:e} exceeds {limit:e}")]
    Drift {
        eta: f64,
        conservation: f64,
        trace: f64,
        limit: f64,
    },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("extrapolation unstable: {0}")]
    Extrapolation(String),

    #[error("operation requires case I, got case {0}")]
    CaseUnsupported(crate::CaseId),

    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}
