use thiserror::Error;

/// Errors produced by the reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("invalid speed model: {0}")]
    InvalidSpeed(String),
    #[error("empty region")]
    EmptyRegion,
    #[error("reference field has zero norm")]
    ZeroReference,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("time step {dt} violates the stability bound {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("source is nonzero outside the measurement domain (node {0})")]
    SupportViolation(usize),
    #[error("multigrid did not converge after {cycles} cycles (residual {residual:e}, target {target:e})")]
    NoConvergence { cycles: usize, residual: f64, target: f64 },
    #[error("region touches the outer boundary")]
    RegionTouchesBoundary,
    #[error("ray trapped for the whole time budget {0}")]
    Trapped(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
