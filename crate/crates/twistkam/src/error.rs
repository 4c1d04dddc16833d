use thiserror::Error;

/// Errors surfaced by the numerical kernels.
#[derive(Debug, Error)]
pub enum TwistError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("twist violation while root-solving the map: {0}")]
    TwistViolation(String),

    #[error("minimizer hit the coercivity window boundary at node {node} (window = {window}); increase the window")]
    WindowExhausted { node: usize, window: f64 },

    #[error("theory violation: {0}")]
    TheoryViolation(String),

    #[error("grid resolution insufficient: singularity gap fell below threshold at orbit step {step} (gap = {gap:.3e})")]
    ResolutionInsufficient { step: usize, gap: f64 },

    #[error("point ({x}, {p}) does not lie on the pseudo-graph (residual {residual:.3e})")]
    OffGraph { x: f64, p: f64, residual: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, TwistError>;
