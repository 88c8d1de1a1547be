use super::bank::Bank;
use super::CalibrationError;
use crate::diagnostics::{clt_variance, ess, weighted_sigma, DiagnosticsError};
use crate::regression::RegressionFit;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageEstimate {
    pub c_hat: f64,
    pub sigma_hat: f64,
    pub ess: f64,
    /// Replicates the estimate was computed from.
    pub m_used: usize,
    /// Empirical CLT variance V̂ (importance sampler only).
    pub clt_variance: Option<f64>,
    /// The observed summary fell outside the regression's training box.
    pub extrapolated: bool,
}

/// Self-normalised importance estimate from coverage indicators and
/// unnormalised weights.
pub fn weighted_estimate(covered: &[bool], weights: &[f64]) -> Result<CoverageEstimate, CalibrationError> {
    assert_eq!(covered.len(), weights.len());
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
    let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let c: Vec<f64> = covered.iter().map(|&b| f64::from(u8::from(b))).collect();
    let c_hat = normalized
        .iter()
        .zip(&c)
        .map(|(w, c)| w * c)
        .sum::<f64>()
        .clamp(0.0, 1.0);
    let ess = ess(weights).map_err(|DiagnosticsError::AllZeroWeights| CalibrationError::DegenerateWeights {
        index: 0,
        weight: total,
    })?;
    Ok(CoverageEstimate {
        c_hat,
        sigma_hat: weighted_sigma(&normalized, &c, c_hat),
        ess,
        m_used: covered.len(),
        clt_variance: Some(clt_variance(weights, &c, c_hat)),
        extrapolated: false,
    })
}

/// Replicates of `bank` whose distance is within `rho`, in bank order.
/// Replicates without a distance are always kept.
pub fn window_bank<D: Clone>(bank: &Bank<D>, rho: f64) -> Bank<D> {
    let replicates: Vec<_> = bank
        .replicates
        .iter()
        .filter(|r| r.distance.is_none_or(|d| d <= rho))
        .cloned()
        .collect();
    Bank {
        algorithm: bank.algorithm,
        replicates,
        target: bank.target,
        proposals: bank.proposals,
        timed_out: bank.timed_out,
        summary_dim: bank.summary_dim,
    }
}

/// Regression estimate of the coverage at observed summary `s_y`.
pub fn estimate_coverage_at<D>(bank: &Bank<D>, fit: &RegressionFit, s_y: &[f64]) -> CoverageEstimate {
    let p = fit.predict(s_y);
    CoverageEstimate {
        c_hat: p.probability,
        sigma_hat: p.std_error,
        ess: bank.len() as f64,
        m_used: bank.len(),
        clt_variance: None,
        extrapolated: p.extrapolated,
    }
}
