use std::collections::HashMap;

use rayon::prelude::*;

use super::estimate::{weighted_estimate, CoverageEstimate};
use super::{ApproxPosterior, CalibrationConfig, CalibrationError, DistanceKind, ExactPosterior, Model, SetSource};
use crate::credible::interval_from_samples;
use crate::distance::{ks_discrete, ks_grid, ks_sorted, summary_distance, DistanceError};
use crate::rng::{auxiliary_rng, replicate_rng, SimRng};

/// Proposals evaluated per parallel batch by the importance sampler. Fixed so
/// that which proposals get evaluated never depends on the worker count.
const PROPOSAL_BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Oracle,
    Regression,
    Importance,
    Curve,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oracle => "oracle",
            Algorithm::Regression => "regress",
            Algorithm::Importance => "is",
            Algorithm::Curve => "curve",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicate<D> {
    /// Index of the random substream that produced this replicate.
    pub index: usize,
    pub phi: f64,
    pub data: D,
    /// Approximate-posterior draws at `data`, sorted ascending. Empty unless
    /// the configuration needs them.
    pub theta: Vec<f64>,
    pub covered: bool,
    /// G(φ): approximate-posterior CDF at `data` evaluated at φ.
    pub pit: f64,
    /// Unnormalised importance weight (importance sampler only).
    pub weight: Option<f64>,
    pub summary: Vec<f64>,
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bank<D> {
    pub algorithm: Algorithm,
    pub replicates: Vec<Replicate<D>>,
    /// Requested replicate count M.
    pub target: usize,
    /// Proposals consumed (equals the bank size without a window).
    pub proposals: u64,
    /// The proposal cap was hit before `target` replicates were accepted.
    pub timed_out: bool,
    pub summary_dim: usize,
}

impl<D> Bank<D> {
    pub fn len(&self) -> usize {
        self.replicates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicates.is_empty()
    }

    pub fn covered(&self) -> Vec<bool> {
        self.replicates.iter().map(|r| r.covered).collect()
    }

    pub fn summaries(&self) -> Vec<Vec<f64>> {
        self.replicates.iter().map(|r| r.summary.clone()).collect()
    }

    /// Importance weights, or ones when the bank is unweighted.
    pub fn weights(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.weight.unwrap_or(1.0)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ImportanceRun<D> {
    pub estimate: CoverageEstimate,
    pub bank: Bank<D>,
}

fn needs_theta(cfg: &CalibrationConfig, dist: Option<DistanceKind>) -> bool {
    cfg.set_source == SetSource::Samples || dist == Some(DistanceKind::KsSamples)
}

fn draw_theta<P: ApproxPosterior>(post: &P, j: usize, rng: &mut SimRng) -> Vec<f64> {
    let mut theta = post.sample(j, rng);
    theta.sort_by(f64::total_cmp);
    theta
}

fn is_covered<P: ApproxPosterior>(
    post: &P,
    theta: &[f64],
    phi: f64,
    cfg: &CalibrationConfig,
    index: usize,
) -> Result<bool, CalibrationError> {
    let set = match cfg.set_source {
        SetSource::Exact => post.credible_set(cfg.alpha, cfg.set_kind),
        SetSource::Samples => interval_from_samples(theta, cfg.alpha, cfg.set_kind),
    }
    .map_err(|source| CalibrationError::CredibleSet { index, source })?;
    Ok(set.contains(phi))
}

fn simulator_error(index: usize) -> impl FnOnce(super::ModelError) -> CalibrationError {
    move |source| CalibrationError::Simulator { index, source }
}

fn approx_at<M: Model>(model: &M, y: &M::Data, index: usize) -> Result<M::Posterior, CalibrationError> {
    model.approx_posterior(y).map_err(simulator_error(index))
}

/// Parameters drawn from the exact posterior at `y`, credible sets from the
/// approximate posterior at the same `y`.
pub fn run_oracle<M: Model>(
    model: &M,
    y: &M::Data,
    cfg: &CalibrationConfig,
) -> Result<(CoverageEstimate, Bank<M::Data>), CalibrationError> {
    cfg.validate()?;
    let exact = model.exact_posterior(y).ok_or(CalibrationError::MissingOracle)?;
    let post = approx_at(model, y, 0)?;
    let fixed_set = match cfg.set_source {
        SetSource::Exact => Some(
            post.credible_set(cfg.alpha, cfg.set_kind)
                .map_err(|source| CalibrationError::CredibleSet { index: 0, source })?,
        ),
        SetSource::Samples => None,
    };
    let summary = model.summary(y);
    let one = |i: usize| -> Result<Replicate<M::Data>, CalibrationError> {
        let mut rng = replicate_rng(cfg.master_seed, i);
        let phi = exact.sample(&mut rng);
        let (theta, covered) = match &fixed_set {
            Some(set) => (Vec::new(), set.contains(phi)),
            None => {
                let theta = draw_theta(&post, cfg.posterior_draws, &mut rng);
                let c = is_covered(&post, &theta, phi, cfg, i)?;
                (theta, c)
            }
        };
        Ok(Replicate {
            index: i,
            phi,
            data: y.clone(),
            theta,
            covered,
            pit: post.cdf(phi),
            weight: None,
            summary: summary.clone(),
            distance: None,
        })
    };
    let replicates = cfg.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>, _>>()
    })??;
    let m = replicates.len();
    let c_hat = replicates.iter().filter(|r| r.covered).count() as f64 / m as f64;
    let estimate = CoverageEstimate {
        c_hat,
        sigma_hat: (c_hat * (1.0 - c_hat) / m as f64).sqrt(),
        ess: m as f64,
        m_used: m,
        clt_variance: None,
        extrapolated: false,
    };
    let bank = Bank {
        algorithm: Algorithm::Oracle,
        replicates,
        target: cfg.replicates,
        proposals: m as u64,
        timed_out: false,
        summary_dim: model.summary_dim(),
    };
    Ok((estimate, bank))
}

/// Parameters from the prior; the training bank for the regression estimator.
pub fn run_regression_bank<M: Model>(model: &M, cfg: &CalibrationConfig) -> Result<Bank<M::Data>, CalibrationError> {
    cfg.validate()?;
    let with_theta = needs_theta(cfg, None);
    let one = |i: usize| -> Result<Replicate<M::Data>, CalibrationError> {
        let mut rng = replicate_rng(cfg.master_seed, i);
        let phi = model.sample_prior(&mut rng);
        let data = model.simulate(phi, &mut rng).map_err(simulator_error(i))?;
        let post = approx_at(model, &data, i)?;
        let theta = if with_theta {
            draw_theta(&post, cfg.posterior_draws, &mut rng)
        } else {
            Vec::new()
        };
        let covered = is_covered(&post, &theta, phi, cfg, i)?;
        Ok(Replicate {
            index: i,
            phi,
            summary: model.summary(&data),
            data,
            theta,
            covered,
            pit: post.cdf(phi),
            weight: None,
            distance: None,
        })
    };
    let replicates = cfg.install(|| {
        (0..cfg.replicates)
            .into_par_iter()
            .map(one)
            .collect::<Result<Vec<_>, _>>()
    })??;
    Ok(Bank {
        algorithm: Algorithm::Regression,
        proposals: replicates.len() as u64,
        replicates,
        target: cfg.replicates,
        timed_out: false,
        summary_dim: model.summary_dim(),
    })
}

/// What simulated datasets are compared against.
enum Reference {
    Summary(Vec<f64>),
    Grid { grid: Vec<f64>, cdf: Vec<f64> },
    Samples(Vec<f64>),
    Discrete { order: Vec<i64>, masses: HashMap<i64, f64> },
}

impl Reference {
    fn build<M: Model>(
        model: &M,
        y: &M::Data,
        post: &M::Posterior,
        cfg: &CalibrationConfig,
        dist: DistanceKind,
    ) -> Result<Self, CalibrationError> {
        Ok(match dist {
            DistanceKind::Summary => Reference::Summary(model.summary(y)),
            DistanceKind::KsGrid => {
                let grid = model.parameter_grid();
                let cdf = grid.iter().map(|t| post.cdf(*t)).collect();
                Reference::Grid { grid, cdf }
            }
            DistanceKind::KsSamples => {
                let mut rng = auxiliary_rng(cfg.master_seed, 0);
                Reference::Samples(draw_theta(post, cfg.posterior_draws, &mut rng))
            }
            DistanceKind::KsDiscrete => {
                let mut probs = post.probabilities().ok_or_else(|| {
                    CalibrationError::Config("discrete KS distance needs a discrete posterior".into())
                })?;
                probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                let order = probs.iter().map(|(l, _)| *l).collect();
                Reference::Discrete {
                    order,
                    masses: probs.into_iter().collect(),
                }
            }
        })
    }

    fn distance<P: ApproxPosterior>(&self, summary: &[f64], post: &P, theta: &[f64]) -> Result<f64, DistanceError> {
        match self {
            Reference::Summary(s) => summary_distance(summary, s),
            Reference::Grid { grid, cdf } => {
                let other: Vec<f64> = grid.iter().map(|t| post.cdf(*t)).collect();
                ks_grid(&other, cdf)
            }
            Reference::Samples(reference) => Ok(ks_sorted(theta, reference)),
            Reference::Discrete { order, masses } => {
                let other: HashMap<i64, f64> = post.probabilities().unwrap_or_default().into_iter().collect();
                ks_discrete(&other, masses, order)
            }
        }
    }
}

/// Importance-sampler proposals φ ~ π̃(·|y), y' ~ p(·|φ), kept when
/// δ(y', y) ≤ ρ, until `M` are kept or `proposal_cap_factor · M` proposals
/// have been spent. Hitting the cap is reported through `timed_out`, with the
/// replicates accepted so far.
pub fn run_proposal_bank<M: Model>(
    model: &M,
    y: &M::Data,
    cfg: &CalibrationConfig,
    dist: DistanceKind,
) -> Result<Bank<M::Data>, CalibrationError> {
    cfg.validate()?;
    let post_y = approx_at(model, y, 0)?;
    let reference = Reference::build(model, y, &post_y, cfg, dist)?;
    let log_lik_ref = post_y.log_approx_likelihood(post_y.quantile(0.5));
    let with_theta = needs_theta(cfg, Some(dist));
    let cap = cfg.proposal_cap_factor.saturating_mul(cfg.replicates as u64);

    // Ok(None) marks a proposal outside the window.
    let propose = |i: usize| -> Result<Option<Replicate<M::Data>>, CalibrationError> {
        let mut rng = replicate_rng(cfg.master_seed, i);
        let phi = post_y.sample(1, &mut rng)[0];
        let data = model.simulate(phi, &mut rng).map_err(simulator_error(i))?;
        let post = approx_at(model, &data, i)?;
        let theta = if with_theta {
            draw_theta(&post, cfg.posterior_draws, &mut rng)
        } else {
            Vec::new()
        };
        let summary = model.summary(&data);
        let distance = reference.distance(&summary, &post, &theta)?;
        if distance > cfg.rho {
            return Ok(None);
        }
        let weight = (log_lik_ref - post_y.log_approx_likelihood(phi)).exp();
        if !(weight.is_finite() && weight > 0.0) {
            return Err(CalibrationError::DegenerateWeights { index: i, weight });
        }
        let covered = is_covered(&post, &theta, phi, cfg, i)?;
        Ok(Some(Replicate {
            index: i,
            phi,
            pit: post.cdf(phi),
            data,
            theta,
            covered,
            weight: Some(weight),
            summary,
            distance: Some(distance),
        }))
    };

    let mut replicates = Vec::with_capacity(cfg.replicates);
    let mut consumed: u64 = 0;
    while replicates.len() < cfg.replicates && consumed < cap {
        let start = consumed as usize;
        let end = (consumed + PROPOSAL_BATCH as u64).min(cap) as usize;
        let batch = cfg.install(|| (start..end).into_par_iter().map(&propose).collect::<Vec<_>>())?;
        for outcome in batch {
            consumed += 1;
            if let Some(r) = outcome? {
                replicates.push(r);
                if replicates.len() == cfg.replicates {
                    break;
                }
            }
        }
    }
    Ok(Bank {
        algorithm: Algorithm::Importance,
        timed_out: replicates.len() < cfg.replicates,
        replicates,
        target: cfg.replicates,
        proposals: consumed,
        summary_dim: model.summary_dim(),
    })
}

/// Importance-sampling estimate of the coverage at `y`.
pub fn run_importance_sampler<M: Model>(
    model: &M,
    y: &M::Data,
    cfg: &CalibrationConfig,
    dist: DistanceKind,
) -> Result<ImportanceRun<M::Data>, CalibrationError> {
    let bank = run_proposal_bank(model, y, cfg, dist)?;
    if bank.timed_out {
        return Err(CalibrationError::WindowTimeout {
            accepted: bank.len(),
            wanted: bank.target,
            proposals: bank.proposals,
        });
    }
    let estimate = weighted_estimate(&bank.covered(), &bank.weights())?;
    Ok(ImportanceRun { estimate, bank })
}
