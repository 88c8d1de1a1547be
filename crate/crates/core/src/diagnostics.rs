//! Importance-sampling health metrics and ρ-sweep tables.

use thiserror::Error;

use crate::engine::{weighted_estimate, window_bank, Bank};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("all importance weights are zero")]
    AllZeroWeights,
}

/// Effective sample size (Σw)²/Σw².
pub fn ess(weights: &[f64]) -> Result<f64, DiagnosticsError> {
    let sum: f64 = weights.iter().sum();
    let sum_sq: f64 = weights.iter().map(|w| w * w).sum();
    if !(sum_sq > 0.0) {
        return Err(DiagnosticsError::AllZeroWeights);
    }
    Ok(sum * sum / sum_sq)
}

/// √(Σ w_i²(c_i − ĉ)²) for normalised weights.
pub fn weighted_sigma(normalized: &[f64], c: &[f64], c_hat: f64) -> f64 {
    normalized
        .iter()
        .zip(c)
        .map(|(w, c)| w * w * (c - c_hat) * (c - c_hat))
        .sum::<f64>()
        .sqrt()
}

/// V̂ = M⁻¹ Σ (k̂ w̃_i)²(c_i − d̂)² with k̂ = M / Σ w̃_i, for unnormalised
/// weights. V̂/M approximates the variance of the weighted estimate.
pub fn clt_variance(weights: &[f64], c: &[f64], d_hat: f64) -> f64 {
    let m = weights.len() as f64;
    let k = m / weights.iter().sum::<f64>();
    weights
        .iter()
        .zip(c)
        .map(|(w, c)| {
            let kw = k * w;
            kw * kw * (c - d_hat) * (c - d_hat)
        })
        .sum::<f64>()
        / m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub m_used: usize,
    /// NaN when the window is empty.
    pub ess: f64,
    pub c_hat: f64,
    pub sigma_hat: f64,
}

impl SweepRow {
    pub fn is_empty(&self) -> bool {
        self.m_used == 0
    }
}

/// Re-window one proposal bank at each radius of `rho_grid`.
pub fn rho_sweep<D: Clone>(bank: &Bank<D>, rho_grid: &[f64]) -> Vec<SweepRow> {
    rho_grid
        .iter()
        .map(|&rho| {
            let inside = window_bank(bank, rho);
            let est = if inside.is_empty() {
                None
            } else {
                weighted_estimate(&inside.covered(), &inside.weights()).ok()
            };
            match est {
                Some(e) => SweepRow {
                    rho,
                    m_used: inside.len(),
                    ess: e.ess,
                    c_hat: e.c_hat,
                    sigma_hat: e.sigma_hat,
                },
                None => SweepRow {
                    rho,
                    m_used: inside.len(),
                    ess: f64::NAN,
                    c_hat: f64::NAN,
                    sigma_hat: f64::NAN,
                },
            }
        })
        .collect()
}
