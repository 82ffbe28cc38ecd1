use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrices or states of incompatible size.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// An eigenvector could not be matched to a product-basis label with
    /// sufficient overlap.
    #[error("ambiguous label assignment for eigenvector {index}: best overlap {overlap:.3}")]
    AmbiguousLabel { index: usize, overlap: f64 },

    /// A requested level or transition label does not exist.
    #[error("unknown label: {0}")]
    UnknownLabel(String),

    /// Fewer data points than free parameters.
    #[error("under-determined problem: {got} data points for {needed} parameters")]
    Underdetermined { needed: usize, got: usize },

    /// An iterative solver stopped without meeting its tolerances.
    #[error("no convergence after {iterations} iterations: {reason}")]
    NonConvergence { iterations: usize, reason: String },

    /// A parameter is not constrained by the data.
    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),

    /// A constraint cannot be met by any candidate.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A conditional sample contained no events.
    #[error("empty sample: {0}")]
    EmptySample(String),

    /// Malformed text input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
