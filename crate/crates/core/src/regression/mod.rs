//! Penalised spline logistic regression of binary coverage outcomes on
//! summary statistics.
//!
//! Each summary coordinate gets an additive cubic B-spline term; spline
//! coefficients carry a ridge penalty `λ‖γ‖²` whose strength is chosen by
//! 5-fold cross-validated deviance. `basis_dim = 0` gives plain linear
//! logistic regression with the same penalty.

mod basis;
mod fit;
mod text;

pub use basis::SplineBasis;
pub use fit::{fit, fit_with_lambda, Prediction, RegressionFit, LAMBDA_GRID};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("need at least 10 observations, got {0}")]
    TooFewObservations(usize),
    #[error("separation: {0}")]
    Separation(String),
    #[error("summary rows have inconsistent dimensions")]
    DimensionMismatch,
    #[error("non-finite summary value in row {0}")]
    NonFinite(usize),
    #[error("basis dimension must be 0 (linear) or at least 4, got {0}")]
    BasisDim(usize),
    #[error("penalised system is not positive definite")]
    Singular,
    #[error("cannot parse regression fit: {0}")]
    Parse(String),
}
