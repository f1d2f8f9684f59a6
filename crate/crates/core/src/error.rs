//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by model construction, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric within tolerance (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate configuration for pair ({i}, {j}): {reason}")]
    DegenerateConfiguration { i: usize, j: usize, reason: String },

    #[error("VAR process is not stationary (spectral radius {spectral_radius:.6})")]
    NonStationary { spectral_radius: f64 },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("optimizer did not converge ({context}); best objective {best_value:.6e} at {best_point:?}")]
    NonConvergence {
        context: String,
        best_point: Vec<f64>,
        best_value: f64,
    },

    #[error("no positive-definite starting point found: {0}")]
    Infeasible(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("missing value in column '{column}' at data row {row}")]
    MissingValue { column: String, row: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("file format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by a loss of positive definiteness or
    /// another numerical infeasibility, as opposed to malformed input.
    pub fn is_numerical_infeasibility(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite(_)
                | Error::Singular(_)
                | Error::DegenerateConfiguration { .. }
                | Error::NonStationary { .. }
                | Error::Infeasible(_)
                | Error::NonConvergence { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
