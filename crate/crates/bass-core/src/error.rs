use thiserror::Error;

use crate::mpms_cdf::BassSolution;

/// Errors shared across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grids differ: ({0}) vs ({1})")]
    GridMismatch(String, String),

    #[error("grid truncates {clipped:.3e} of the measure's mass (limit {limit:.1e})")]
    Truncation { clipped: f64, limit: f64 },

    #[error("map is not strictly increasing at index {index} (gap {gap:.3e})")]
    NonMonotoneMap { index: usize, gap: f64 },

    #[error("tridiagonal solve hit a near-zero pivot at row {row}")]
    SolverFailure { row: usize },

    #[error("kernel bandwidth 6*sqrt(t) = {reach:.3} exceeds half the grid width {half_width:.3}")]
    Bandwidth { reach: f64, half_width: f64 },

    #[error("query {x:.6} is outside the affinely extended gradient range")]
    OutOfRange { x: f64 },

    #[error("dual objective evaluation failed: {0}")]
    DualEval(String),

    #[error("marginals are not in strict convex order: {0}")]
    ConvexOrderViolation(String),

    #[error("solver stopped at iteration {iterations} with error {error:.3e} > tol")]
    NotConverged {
        iterations: usize,
        error: f64,
        best: Box<BassSolution>,
    },

    #[error("denominator vanishes against a nonzero numerator on {share:.1}% of points")]
    DegenerateRatio { share: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate strike {strike} at line {line}")]
    DuplicateStrike { strike: f64, line: usize },

    #[error("{share:.1}% of pre-floor density mass is negative; data too noisy for the bandwidth")]
    NegativeMass { share: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
