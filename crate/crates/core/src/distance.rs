//! Distances between datasets, measured through the approximate posteriors
//! they induce (Kolmogorov–Smirnov) or through their summary statistics.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistanceError {
    #[error("empty sample")]
    EmptySample,
    #[error("CDFs evaluated on different grids ({0} vs {1} points)")]
    GridMismatch(usize, usize),
    #[error("label {0} has positive mass but no rank in the reference order")]
    UnrankedLabel(String),
    #[error("summary vectors have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

/// Two-sample KS statistic: sup-norm distance between empirical CDFs.
pub fn ks_continuous(a: &[f64], b: &[f64]) -> Result<f64, DistanceError> {
    if a.is_empty() || b.is_empty() {
        return Err(DistanceError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(ks_sorted(&a, &b))
}

/// As [`ks_continuous`] for inputs already sorted ascending.
pub fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup = 0.0f64;
    while i < a.len() && j < b.len() {
        // Step past every copy of the smallest remaining value in both samples.
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Sup-norm distance between two CDFs tabulated on the same grid.
pub fn ks_grid(cdf_a: &[f64], cdf_b: &[f64]) -> Result<f64, DistanceError> {
    if cdf_a.len() != cdf_b.len() {
        return Err(DistanceError::GridMismatch(cdf_a.len(), cdf_b.len()));
    }
    Ok(cdf_a.iter().zip(cdf_b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// KS distance between two discrete distributions, with labels accumulated
/// in the rank order `order_ref` (typically decreasing mass under the
/// observed-data posterior).
pub fn ks_discrete<L>(p_a: &HashMap<L, f64>, p_b: &HashMap<L, f64>, order_ref: &[L]) -> Result<f64, DistanceError>
where
    L: Eq + Hash + Debug,
{
    let ranked: std::collections::HashSet<&L> = order_ref.iter().collect();
    for (label, mass) in p_a.iter().chain(p_b.iter()) {
        if *mass > 0.0 && !ranked.contains(label) {
            return Err(DistanceError::UnrankedLabel(format!("{label:?}")));
        }
    }
    let (mut ca, mut cb) = (0.0, 0.0);
    let mut sup = 0.0f64;
    for label in order_ref {
        ca += p_a.get(label).copied().unwrap_or(0.0);
        cb += p_b.get(label).copied().unwrap_or(0.0);
        sup = sup.max((ca - cb).abs());
    }
    Ok(sup)
}

/// Euclidean distance between summary vectors.
pub fn summary_distance(s_a: &[f64], s_b: &[f64]) -> Result<f64, DistanceError> {
    if s_a.len() != s_b.len() {
        return Err(DistanceError::DimensionMismatch(s_a.len(), s_b.len()));
    }
    Ok(s_a.iter().zip(s_b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}
