//! Error type shared across the crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid manifold spec: {0}")]
    InvalidSpec(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("field shape {got} does not match grid node count {expected}")]
    ShapeMismatch { got: usize, expected: usize },

    #[error("field contains non-finite values")]
    NonFinite,

    #[error("density is not strictly positive (min {min:.3e})")]
    NonPositiveDensity { min: f64 },

    #[error("right-hand side is not solvable: weighted mean {0:.3e} exceeds tolerance")]
    NotSolvable(f64),

    #[error("elliptic solver did not converge: relative residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("degenerate tangent plane: Otto Gram determinant {0:.3e}")]
    DegeneratePlane(f64),

    #[error("requested horizon {requested:.3e} exceeds shock guard {limit:.3e}")]
    ShockHorizon { requested: f64, limit: f64 },

    #[error("density positivity lost at step {step} (min {min:.3e})")]
    PositivityLoss { step: usize, min: f64 },

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("transport norm drift {drift:.3e} exceeds tolerance {tolerance:.3e}")]
    NormDrift { drift: f64, tolerance: f64 },

    #[error("continuity residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ContinuityResidual { residual: f64, tolerance: f64 },

    #[error("operation unsupported on this manifold: {0}")]
    Unsupported(String),

    #[error("grid too large for exact transport ({nodes} nodes, limit {limit})")]
    GridTooLarge { nodes: usize, limit: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
