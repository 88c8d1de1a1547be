//! Coverage calibration for approximate Bayesian credible sets.
//!
//! Given an approximate posterior π̃(·|y), estimate how often its level-α
//! credible set at the observed data actually covers the parameter, by
//! simulating (parameter, dataset) pairs and either regressing coverage on
//! summary statistics or importance-weighting pairs whose data resemble the
//! observed data.

pub mod credible;
pub mod diagnostics;
pub mod distance;
pub mod engine;
pub mod grid;
pub mod io;
pub mod models;
pub mod regression;
pub mod rng;
pub mod special;

pub use credible::{CredibleSet, CredibleSetError, Region, SetKind};
pub use diagnostics::{ess, rho_sweep, SweepRow};
pub use engine::{
    coverage_curve, curve_from_bank, estimate_coverage_at, invert_nominal_level, recalibrate_cdf,
    run_importance_sampler, run_oracle, run_proposal_bank, run_regression_bank, Algorithm, ApproxPosterior, Bank,
    CalibrationConfig, CalibrationError, CoverageCurve, CoverageEstimate, DistanceKind, ExactPosterior, ImportanceRun,
    Model, ModelError, Replicate, SetSource,
};
pub use regression::{RegressionError, RegressionFit};
