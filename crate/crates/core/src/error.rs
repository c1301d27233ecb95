//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite geometry: {0}")]
    NonFiniteGeometry(String),
    #[error("degenerate edge: {0}")]
    DegenerateEdge(String),
    #[error("non-positive input: {0}")]
    NonPositiveInput(String),
    #[error("no convergence: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
    #[error("contact active-set failed to stabilize: {0}")]
    Penetration(String),
    #[error("full lift-off: no node rests on the substrate")]
    FullLiftOff,
    #[error("end moment has no sign change over the orientation scan [{lo:.3}, {hi:.3}] rad")]
    NoRoot { lo: f64, hi: f64 },
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("empty dataset: every grid point failed")]
    EmptyDataset,
    #[error("degenerate input channel: {0}")]
    DegenerateChannel(String),
    #[error("format error: {0}")]
    FormatError(String),
    #[error("version mismatch: found {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("training made no progress: best validation MAE {best:.6} at max batch size")]
    NoProgress { best: f64 },
    #[error("empty workspace: no plannable cell")]
    EmptyWorkspace,
    #[error("no path from start to goal within plannable cells")]
    NoPath,
    #[error("invalid plan query: {0}")]
    InvalidQuery(String),
    #[error("excessive slip: {slip:.4} m in a single step exceeds half the sheet length")]
    ExcessiveSlip { slip: f64 },
    #[error("replanning failed: {0}")]
    ReplanFailure(String),
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("config error: {0}")]
    ConfigError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
