//! Coverage calibration over an abstract model.
//!
//! A [`Model`] supplies the ideal prior and observation model, the
//! approximate posterior at any dataset, and summary statistics. The engine
//! farms out replicates (parameter, synthetic dataset, posterior draws,
//! coverage indicator, importance weight) in parallel and aggregates them
//! into coverage estimates:
//!
//! * [`run_oracle`]: parameters drawn from the exact posterior at the data.
//! * [`run_regression_bank`] + [`estimate_coverage_at`]: parameters from the
//!   prior, coverage regressed on summaries.
//! * [`run_importance_sampler`]: parameters from the approximate posterior at
//!   the data, datasets windowed around it, harmonic importance weights.
//! * [`coverage_curve`]: the same sampler, tracked across all nominal levels.

mod bank;
mod curve;
mod estimate;

pub use bank::{
    run_importance_sampler, run_oracle, run_proposal_bank, run_regression_bank, Algorithm, Bank, ImportanceRun,
    Replicate,
};
pub use curve::{coverage_curve, curve_from_bank, invert_nominal_level, recalibrate_cdf, CoverageCurve};
pub use estimate::{estimate_coverage_at, weighted_estimate, window_bank, CoverageEstimate};

use rand::Rng;
use thiserror::Error;

use crate::credible::{CredibleSet, CredibleSetError, SetKind};
use crate::distance::DistanceError;
use crate::regression::RegressionError;

/// Failure inside a model's simulator or posterior construction.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{0}")]
pub struct ModelError(pub String);

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model has no exact posterior to run the oracle with")]
    MissingOracle,
    #[error("replicate {index}: {source}")]
    Simulator { index: usize, source: ModelError },
    #[error("replicate {index}: {source}")]
    CredibleSet { index: usize, source: CredibleSetError },
    #[error("importance weight of replicate {index} is {weight}")]
    DegenerateWeights { index: usize, weight: f64 },
    #[error("window accepted {accepted} of {wanted} replicates within {proposals} proposals")]
    WindowTimeout {
        accepted: usize,
        wanted: usize,
        proposals: u64,
    },
    #[error("target coverage {target} exceeds the curve maximum {max}")]
    TargetUnreachable { target: f64, max: f64 },
    #[error("coverage curve is not nondecreasing")]
    NonMonotoneCurve,
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Approximate posterior π̃(·|y) at one dataset.
pub trait ApproxPosterior: Send + Sync {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64>;

    /// π̃(θ|y) up to a constant.
    fn unnormalized_density(&self, theta: f64) -> f64;

    /// log p̃(y|φ) for this posterior's dataset `y`; importance weights are
    /// its negated exponential.
    fn log_approx_likelihood(&self, phi: f64) -> f64;

    fn approx_likelihood(&self, phi: f64) -> f64 {
        self.log_approx_likelihood(phi).exp()
    }

    fn cdf(&self, theta: f64) -> f64;

    fn quantile(&self, p: f64) -> f64;

    /// Label masses, for posteriors over integer labels.
    fn probabilities(&self) -> Option<Vec<(i64, f64)>> {
        None
    }

    /// Exact level-`alpha` credible set of π̃.
    fn credible_set(&self, alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError>;
}

/// Exact posterior π(·|y); only oracle models provide one.
pub trait ExactPosterior: Send + Sync {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;
    fn cdf(&self, phi: f64) -> f64;
}

/// Ideal model plus its approximation.
///
/// Implementations are shared read-only across worker threads; simulation
/// must depend only on its arguments.
pub trait Model: Sync {
    type Data: Clone + Send + Sync;
    type Posterior: ApproxPosterior;
    type Exact: ExactPosterior;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64;

    fn simulate<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> Result<Self::Data, ModelError>;

    fn approx_posterior(&self, y: &Self::Data) -> Result<Self::Posterior, ModelError>;

    /// Summary statistics s(y); always `summary_dim()` long.
    fn summary(&self, y: &Self::Data) -> Vec<f64>;

    fn summary_dim(&self) -> usize;

    fn exact_posterior(&self, y: &Self::Data) -> Option<Self::Exact>;

    /// Parameter points on which grid KS distances compare posterior CDFs.
    fn parameter_grid(&self) -> Vec<f64>;
}

/// Where the per-replicate credible set comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSource {
    /// The exact set of π̃ at the replicate's data (operational coverage b).
    Exact,
    /// Estimated from `J` draws of π̃ (realised coverage c).
    Samples,
}

/// How simulated datasets are compared with the observed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Euclidean distance between summary vectors.
    Summary,
    /// KS distance between approximate-posterior CDFs on the model's parameter grid.
    KsGrid,
    /// KS distance between `J` approximate-posterior draws at each dataset.
    KsSamples,
    /// KS distance between label masses, ranked by the observed-data posterior.
    KsDiscrete,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Nominal level α.
    pub alpha: f64,
    /// Replicate count M.
    pub replicates: usize,
    /// Posterior draws J per replicate.
    pub posterior_draws: usize,
    /// Window radius ρ (importance sampler only).
    pub rho: f64,
    pub master_seed: u64,
    pub set_kind: SetKind,
    pub set_source: SetSource,
    /// Worker threads; 0 uses the global rayon pool.
    pub workers: usize,
    /// Uniform α-grid size for coverage curves.
    pub curve_points: usize,
    /// The importance sampler gives up after `proposal_cap_factor · M` proposals.
    pub proposal_cap_factor: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            replicates: 1000,
            posterior_draws: 100,
            rho: f64::INFINITY,
            master_seed: 1,
            set_kind: SetKind::EqualTail,
            set_source: SetSource::Exact,
            workers: 0,
            curve_points: 512,
            proposal_cap_factor: 1000,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.replicates == 0 {
            return bad("replicate count M must be at least 1".into());
        }
        if self.posterior_draws == 0 {
            return bad("posterior draw count J must be at least 1".into());
        }
        if self.rho.is_nan() || self.rho < 0.0 {
            return bad(format!("window radius must be >= 0, got {}", self.rho));
        }
        if self.curve_points == 0 {
            return bad("curve grid needs at least one point".into());
        }
        if self.proposal_cap_factor == 0 {
            return bad("proposal cap factor must be positive".into());
        }
        Ok(())
    }

    /// Run `f` on a pool with `workers` threads (or the global pool).
    pub(crate) fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T, CalibrationError> {
        if self.workers == 0 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CalibrationError::Pool(e.to_string()))?;
        Ok(pool.install(f))
    }
}
