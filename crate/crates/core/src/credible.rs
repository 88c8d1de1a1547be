//! Credible sets: intervals from sorted samples or grid densities, and HPD
//! sets for discrete distributions.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::grid::GridDensity;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CredibleSetError {
    #[error("{kind} set at level {alpha} needs more than {available} samples")]
    InsufficientSamples {
        kind: SetKind,
        alpha: f64,
        available: usize,
    },
    #[error("nominal level {0} is outside (0, 1]")]
    InvalidLevel(f64),
    #[error("{0} sets cannot be built from this input")]
    UnsupportedKind(SetKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetKind {
    Hpd,
    EqualTail,
    LowerTail,
    DiscreteHpd,
}

impl fmt::Display for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetKind::Hpd => "hpd",
            SetKind::EqualTail => "equal_tail",
            SetKind::LowerTail => "lower_tail",
            SetKind::DiscreteHpd => "discrete_hpd",
        })
    }
}

impl FromStr for SetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "hpd" => Ok(SetKind::Hpd),
            "equal_tail" => Ok(SetKind::EqualTail),
            "lower_tail" => Ok(SetKind::LowerTail),
            "discrete_hpd" => Ok(SetKind::DiscreteHpd),
            other => Err(format!("unknown credible-set kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    /// Closed interval; `lo` may be -∞.
    Interval { lo: f64, hi: f64 },
    /// Disjoint closed intervals in increasing order.
    Union(Vec<(f64, f64)>),
    /// Explicit integer labels, sorted and unique.
    Discrete(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CredibleSet {
    pub kind: SetKind,
    pub alpha: f64,
    pub region: Region,
}

impl CredibleSet {
    pub fn interval(kind: SetKind, alpha: f64, lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self {
            kind,
            alpha,
            region: Region::Interval { lo, hi },
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match &self.region {
            Region::Interval { lo, hi } => *lo <= x && x <= *hi,
            Region::Union(parts) => parts.iter().any(|(lo, hi)| *lo <= x && x <= *hi),
            Region::Discrete(labels) => x.fract() == 0.0 && labels.binary_search(&(x as i64)).is_ok(),
        }
    }

    /// Endpoints when the region is a single interval.
    pub fn bounds(&self) -> Option<(f64, f64)> {
        match &self.region {
            Region::Interval { lo, hi } => Some((*lo, *hi)),
            Region::Union(parts) if parts.len() == 1 => Some(parts[0]),
            _ => None,
        }
    }
}

fn check_level(alpha: f64) -> Result<(), CredibleSetError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(CredibleSetError::InvalidLevel(alpha))
    }
}

/// `⌈p·n⌉` as a 1-based order-statistic index, clamped below at 1.
///
/// The product is nudged down by 1e-9 so that e.g. 0.9·10 rounds to 9 even
/// when its binary representation lands just above the integer.
pub fn order_index(p: f64, n: usize) -> usize {
    ((p * n as f64 - 1e-9).ceil().max(1.0)) as usize
}

/// Credible interval from draws sorted in ascending order.
pub fn interval_from_samples(theta: &[f64], alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError> {
    check_level(alpha)?;
    debug_assert!(theta.windows(2).all(|w| w[0] <= w[1]), "samples must be sorted");
    let j = theta.len();
    let insufficient = || CredibleSetError::InsufficientSamples {
        kind,
        alpha,
        available: j,
    };
    match kind {
        SetKind::LowerTail => {
            let k = order_index(alpha, j);
            if j == 0 || k > j {
                return Err(insufficient());
            }
            Ok(CredibleSet::interval(kind, alpha, f64::NEG_INFINITY, theta[k - 1]))
        }
        SetKind::EqualTail => {
            if j < 2 {
                return Err(insufficient());
            }
            let lo = order_index((1.0 - alpha) / 2.0, j);
            let hi = order_index((1.0 + alpha) / 2.0, j);
            if hi > j {
                return Err(insufficient());
            }
            Ok(CredibleSet::interval(kind, alpha, theta[lo - 1], theta[hi - 1]))
        }
        SetKind::Hpd => {
            let width = order_index(alpha, j);
            if j < 2 || width > j {
                return Err(insufficient());
            }
            // Shortest window holding `width` consecutive order statistics;
            // the first minimum wins ties.
            let (start, _) = (0..=j - width)
                .map(|s| (s, theta[s + width - 1] - theta[s]))
                .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
            Ok(CredibleSet::interval(
                kind,
                alpha,
                theta[start],
                theta[start + width - 1],
            ))
        }
        SetKind::DiscreteHpd => {
            if j == 0 {
                return Err(insufficient());
            }
            let masses = empirical_masses(theta);
            let hpd = discrete_hpd(&masses, alpha);
            Ok(CredibleSet {
                kind,
                alpha,
                region: Region::Discrete(sorted(hpd.members)),
            })
        }
    }
}

/// Label frequencies of integer-valued draws.
pub fn empirical_masses(theta: &[f64]) -> Vec<(i64, f64)> {
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    for t in theta {
        *counts.entry(t.round() as i64).or_default() += 1;
    }
    let n = theta.len() as f64;
    counts.into_iter().map(|(l, c)| (l, c as f64 / n)).collect()
}

fn sorted(mut v: Vec<i64>) -> Vec<i64> {
    v.sort_unstable();
    v
}

/// Credible set from a tabulated density.
///
/// Tail intervals invert the interpolated CDF and hold mass `alpha` exactly.
/// HPD ranks grid cells by mean height and accumulates the highest until the
/// mass reaches `alpha`, so it overshoots by at most one cell's mass.
pub fn interval_from_grid(density: &GridDensity, alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError> {
    check_level(alpha)?;
    match kind {
        SetKind::EqualTail => Ok(CredibleSet::interval(
            kind,
            alpha,
            density.quantile((1.0 - alpha) / 2.0),
            density.quantile((1.0 + alpha) / 2.0),
        )),
        SetKind::LowerTail => Ok(CredibleSet::interval(
            kind,
            alpha,
            f64::NEG_INFINITY,
            density.quantile(alpha),
        )),
        SetKind::Hpd => {
            let grid = density.grid();
            let masses = density.cell_masses();
            let mut order: Vec<usize> = (0..masses.len()).collect();
            let height = |k: usize| masses[k] / (grid[k + 1] - grid[k]);
            order.sort_by(|&a, &b| height(b).total_cmp(&height(a)).then(a.cmp(&b)));
            let mut chosen = vec![false; masses.len()];
            let mut acc = 0.0;
            for k in order {
                if acc >= alpha - 1e-12 {
                    break;
                }
                chosen[k] = true;
                acc += masses[k];
            }
            let mut parts: Vec<(f64, f64)> = Vec::new();
            for (k, &on) in chosen.iter().enumerate() {
                if !on {
                    continue;
                }
                match parts.last_mut() {
                    Some(last) if last.1 == grid[k] => last.1 = grid[k + 1],
                    _ => parts.push((grid[k], grid[k + 1])),
                }
            }
            let region = if parts.len() == 1 {
                Region::Interval {
                    lo: parts[0].0,
                    hi: parts[0].1,
                }
            } else {
                Region::Union(parts)
            };
            Ok(CredibleSet { kind, alpha, region })
        }
        SetKind::DiscreteHpd => Err(CredibleSetError::UnsupportedKind(kind)),
    }
}

/// A discrete HPD set together with the mass it encloses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHpd<L> {
    /// Members in order of inclusion (descending mass).
    pub members: Vec<L>,
    pub mass: f64,
}

/// Smallest set of labels whose mass reaches `alpha`, taken in descending
/// mass with ties broken by label order. Zero-mass labels are never included.
pub fn discrete_hpd<L: Ord + Clone>(masses: &[(L, f64)], alpha: f64) -> DiscreteHpd<L> {
    let mut ranked: Vec<&(L, f64)> = masses.iter().filter(|(_, m)| *m > 0.0).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut members = Vec::new();
    let mut mass = 0.0;
    for (label, m) in ranked {
        if mass >= alpha - 1e-12 {
            break;
        }
        members.push(label.clone());
        mass += m;
    }
    DiscreteHpd { members, mass }
}

/// CredibleSet wrapper around [`discrete_hpd`] for integer labels.
pub fn discrete_hpd_set(masses: &[(i64, f64)], alpha: f64) -> Result<CredibleSet, CredibleSetError> {
    check_level(alpha)?;
    let hpd = discrete_hpd(masses, alpha);
    Ok(CredibleSet {
        kind: SetKind::DiscreteHpd,
        alpha,
        region: Region::Discrete(sorted(hpd.members)),
    })
}
