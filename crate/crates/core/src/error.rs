use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// The Jacobi sweep did not drive the off-diagonal norm below tolerance.
    #[error("eigendecomposition did not converge (off-diagonal residual {residual:.3e})")]
    EigenNoConvergence { residual: f64 },

    /// An operation was asked to evaluate a loss on an empty sample split.
    #[error("empty {split} split")]
    EmptySplit { split: &'static str },

    /// Train-by-validation needs a validation split.
    #[error("task has no validation split")]
    MissingValidationSplit,

    /// The analytic GD oracle needs a numerically full-rank design.
    #[error("design matrix is rank deficient (sigma_min/sigma_max = {ratio:.3e})")]
    RankDeficientDesign { ratio: f64 },

    /// A caller-supplied parameter violates a precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T> = std::result::Result<T, Error>;
