use std::path::PathBuf;

use thiserror::Error;

/// Every failure the laboratory can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too coarse: nx={nx}, ny={ny} (need at least 4 cells per direction)")]
    GridTooCoarse { nx: usize, ny: usize },
    #[error("domain edge lengths must be positive and finite (lx={lx}, ly={ly})")]
    NonPositiveLength { lx: f64, ly: f64 },
    #[error("cell anisotropy hx/hy = {ratio} outside [1/8, 8]")]
    Anisotropy { ratio: f64 },
    #[error("unsupported director dimension {0} (expected 2 or 3)")]
    UnsupportedDirectorDimension(usize),
    #[error("unknown boundary condition tag {0:?}")]
    UnknownBoundaryCondition(String),
    #[error("field shape does not match the grid: {0}")]
    ShapeMismatch(String),

    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),
    #[error("time step {dt} rejected (must be finite and at least 1e-12)")]
    InvalidTimeStep { dt: f64 },
    #[error("invalid solver tolerance {0}")]
    InvalidTolerance(f64),
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:e})")]
    SolverNotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("projection failed: divergence {residual:e} exceeds tolerance {tolerance:e} after {iterations} iterations")]
    ProjectionFailed {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("director degenerated: |d| = {min_norm} < 0.5 at cell ({i}, {j})")]
    DirectorDegenerated { min_norm: f64, i: usize, j: usize },
    #[error("steady director flow stopped after {iterations} iterations with residual {residual:e}")]
    SteadyNotReached { iterations: usize, residual: f64 },

    #[error("trajectory too short: need at least 2 samples, got {0}")]
    TrajectoryTooShort(usize),
    #[error("rate fit needs at least 20 samples in the window, got {0}")]
    TooFewSamples(usize),
    #[error("nonpositive value {value} at t={t} inside the fit window")]
    NonPositiveSample { t: f64, value: f64 },
    #[error("dense assembly refused: dimension {dim} exceeds budget {budget}")]
    DenseTooLarge { dim: usize, budget: usize },
    #[error("eigenpair {index} did not converge (residual {residual:e})")]
    EigenNotConverged { index: usize, residual: f64 },
    #[error("invalid spectrum request: {0}")]
    InvalidSpectrumRequest(String),

    #[error("configuration error: {0}")]
    Config(String),
    #[error("refinement study needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        checkpoint: Option<PathBuf>,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed checkpoint header: {0}")]
    MalformedHeader(String),
    #[error("checkpoint dimension mismatch: file has {found}, expected {expected}")]
    DimensionMismatch { found: String, expected: String },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
    #[error("checkpoint has {0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
