use super::bank::{run_proposal_bank, Algorithm, Bank};
use super::{CalibrationConfig, CalibrationError, DistanceKind, Model, SetSource};
use crate::credible::order_index;

/// Estimated coverage as a function of the nominal level, on a grid of
/// increasing levels.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    alpha: Vec<f64>,
    c_hat: Vec<f64>,
    sigma_hat: Vec<f64>,
}

impl CoverageCurve {
    /// Curve through the given points; levels must increase strictly and
    /// coverage must be nondecreasing within [0, 1].
    pub fn from_points(alpha: Vec<f64>, c_hat: Vec<f64>) -> Result<Self, CalibrationError> {
        let sigma_hat = vec![0.0; c_hat.len()];
        Self::checked(alpha, c_hat, sigma_hat)
    }

    fn checked(alpha: Vec<f64>, c_hat: Vec<f64>, sigma_hat: Vec<f64>) -> Result<Self, CalibrationError> {
        if alpha.is_empty() || alpha.len() != c_hat.len() {
            return Err(CalibrationError::Config(
                "curve needs matching, nonempty level and coverage lists".into(),
            ));
        }
        if alpha.windows(2).any(|w| !(w[0] < w[1])) || alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(CalibrationError::Config(
                "curve levels must increase strictly within [0, 1]".into(),
            ));
        }
        if c_hat.windows(2).any(|w| !(w[0] <= w[1])) || c_hat.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(CalibrationError::NonMonotoneCurve);
        }
        Ok(Self {
            alpha,
            c_hat,
            sigma_hat,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn c_hat(&self) -> &[f64] {
        &self.c_hat
    }

    /// Pointwise weighted standard deviation of each ĉ(α_k).
    pub fn sigma_hat(&self) -> &[f64] {
        &self.sigma_hat
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn max(&self) -> f64 {
        *self.c_hat.last().unwrap()
    }

    /// Knots for interpolation, with (0, 0) prepended when the grid starts
    /// above zero.
    fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let anchor = (self.alpha[0] > 0.0).then_some((0.0, 0.0));
        anchor
            .into_iter()
            .chain(self.alpha.iter().copied().zip(self.c_hat.iter().copied()))
    }

    /// Piecewise-linear ĉ(a); flat beyond the last grid level.
    pub fn interpolate(&self, a: f64) -> f64 {
        let mut prev: Option<(f64, f64)> = None;
        for (x, y) in self.knots() {
            if a <= x {
                return match prev {
                    Some((x0, y0)) if x > x0 => y0 + (a - x0) / (x - x0) * (y - y0),
                    _ => y,
                };
            }
            prev = Some((x, y));
        }
        self.max()
    }

    /// Smallest `a` with `interpolate(a) >= p`.
    pub fn inverse_interpolated(&self, p: f64) -> Result<f64, CalibrationError> {
        if p > self.max() {
            return Err(CalibrationError::TargetUnreachable {
                target: p,
                max: self.max(),
            });
        }
        let mut prev: Option<(f64, f64)> = None;
        for (x, y) in self.knots() {
            if y >= p {
                return Ok(match prev {
                    Some((x0, y0)) if y > y0 => x0 + (p - y0) / (y - y0) * (x - x0),
                    _ => x,
                });
            }
            prev = Some((x, y));
        }
        unreachable!("p <= max was checked")
    }
}

/// Uniform level grid k/K, k = 1..K.
fn level_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|k| k as f64 / points as f64).collect()
}

/// Weighted step-function average of the per-replicate lower-tail coverage
/// indicators c_i(α).
///
/// With sampled sets c_i(α) = 1{φ_i ≤ θ_(⌈αJ⌉)}; with exact sets
/// c_i(α) = 1{G_i(φ_i) ≤ α}. The sets come from lower-tail intervals
/// whatever kind the configuration names.
pub fn curve_from_bank<D>(bank: &Bank<D>, source: SetSource, points: usize) -> Result<CoverageCurve, CalibrationError> {
    let weights = bank.weights();
    for (index, &weight) in weights.iter().enumerate() {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(CalibrationError::DegenerateWeights { index, weight });
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(CalibrationError::DegenerateWeights {
            index: 0,
            weight: total,
        });
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let alpha = level_grid(points);

    // First grid position at which each replicate is covered (`points` if never).
    let first: Vec<usize> = bank
        .replicates
        .iter()
        .map(|r| match source {
            SetSource::Exact => alpha.partition_point(|a| *a < r.pit),
            SetSource::Samples => {
                let j = r.theta.len();
                // 1-based index of the first draw at or above φ.
                let rank = r.theta.partition_point(|t| *t < r.phi) + 1;
                if rank > j {
                    points
                } else {
                    alpha.partition_point(|a| order_index(*a, j) < rank)
                }
            }
        })
        .collect();

    let mut c_hat = Vec::with_capacity(points);
    let mut sigma_hat = Vec::with_capacity(points);
    for k in 0..points {
        // Summed in replicate order at every level, so a level that covers a
        // superset of replicates can never round to a smaller total.
        let c: f64 = first
            .iter()
            .zip(&w)
            .filter(|(f, _)| **f <= k)
            .map(|(_, w)| *w)
            .sum::<f64>()
            .min(1.0);
        let var: f64 = first
            .iter()
            .zip(&w)
            .map(|(f, w)| {
                let ci = if *f <= k { 1.0 } else { 0.0 };
                w * w * (ci - c) * (ci - c)
            })
            .sum();
        c_hat.push(c);
        sigma_hat.push(var.sqrt());
    }
    CoverageCurve::checked(alpha, c_hat, sigma_hat)
}

/// Importance-sampled coverage curve at `y`.
pub fn coverage_curve<M: Model>(
    model: &M,
    y: &M::Data,
    cfg: &CalibrationConfig,
    dist: DistanceKind,
) -> Result<(CoverageCurve, Bank<M::Data>), CalibrationError> {
    let mut bank = run_proposal_bank(model, y, cfg, dist)?;
    if bank.timed_out {
        return Err(CalibrationError::WindowTimeout {
            accepted: bank.len(),
            wanted: bank.target,
            proposals: bank.proposals,
        });
    }
    bank.algorithm = Algorithm::Curve;
    let curve = curve_from_bank(&bank, cfg.set_source, cfg.curve_points)?;
    Ok((curve, bank))
}

/// Smallest grid level whose estimated coverage reaches `target`.
pub fn invert_nominal_level(curve: &CoverageCurve, target: f64) -> Result<f64, CalibrationError> {
    let k = curve.c_hat.partition_point(|c| *c < target);
    curve.alpha.get(k).copied().ok_or(CalibrationError::TargetUnreachable {
        target,
        max: curve.max(),
    })
}

/// Corrected CDF values ĉ(ĝ) for approximate-posterior CDF values ĝ.
pub fn recalibrate_cdf(curve: &CoverageCurve, g_hat: &[f64]) -> Vec<f64> {
    g_hat.iter().map(|g| curve.interpolate(g.clamp(0.0, 1.0))).collect()
}
