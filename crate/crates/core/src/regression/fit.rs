use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::basis::SplineBasis;
use super::RegressionError;
use crate::special::{logistic, logit};

const MAX_ITER: usize = 100;
const REL_TOL: f64 = 1e-8;
/// Linear predictors beyond this magnitude on training data count as divergence.
const ETA_LIMIT: f64 = 30.0;
const FOLDS: usize = 5;

/// Candidate ridge strengths: half-decade steps from 1e-4 to 1e2.
pub const LAMBDA_GRID: [f64; 13] = [
    1e-4,
    3.162_277_660_168_379_4e-4,
    1e-3,
    3.162_277_660_168_379_4e-3,
    1e-2,
    3.162_277_660_168_379e-2,
    1e-1,
    3.162_277_660_168_379e-1,
    1.0,
    3.162_277_660_168_379,
    10.0,
    31.622_776_601_683_793,
    100.0,
];

/// Design-matrix layout shared by fitting and prediction.
#[derive(Debug, Clone, PartialEq)]
pub(super) enum Terms {
    /// Intercept plus one slope per covariate.
    Linear { dim: usize },
    /// Intercept plus one spline block per covariate; `None` for constant covariates.
    Spline { bases: Vec<Option<SplineBasis>> },
}

impl Terms {
    pub(super) fn n_columns(&self) -> usize {
        match self {
            Terms::Linear { dim } => 1 + dim,
            Terms::Spline { bases } => 1 + bases.iter().map(|b| b.as_ref().map_or(0, |b| b.dim())).sum::<usize>(),
        }
    }

    fn row(&self, s: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        match self {
            Terms::Linear { .. } => out[1..].copy_from_slice(s),
            Terms::Spline { bases } => {
                let mut at = 1;
                for (basis, x) in bases.iter().zip(s) {
                    if let Some(b) = basis {
                        b.eval(*x, &mut out[at..at + b.dim()]);
                        at += b.dim();
                    }
                }
            }
        }
    }
}

/// A fitted penalised logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub(super) basis_dim: usize,
    pub(super) terms: Terms,
    pub(super) coefficients: Vec<f64>,
    pub(super) lambda: f64,
    /// Row-major inverse of the penalised information matrix.
    pub(super) covariance: Vec<f64>,
    pub(super) lower: Vec<f64>,
    pub(super) upper: Vec<f64>,
    pub(super) n_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    /// Delta-method standard error of `probability`.
    pub std_error: f64,
    pub eta: f64,
    pub eta_std_error: f64,
    /// The query left the bounding box of the training summaries.
    pub extrapolated: bool,
}

impl RegressionFit {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn basis_dim(&self) -> usize {
        self.basis_dim
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn summary_dim(&self) -> usize {
        self.lower.len()
    }

    /// Per-coordinate bounding box of the training summaries.
    pub fn training_box(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    pub fn predict(&self, s: &[f64]) -> Prediction {
        assert_eq!(s.len(), self.summary_dim(), "summary dimension mismatch");
        let p = self.coefficients.len();
        let mut row = vec![0.0; p];
        self.terms.row(s, &mut row);
        let eta: f64 = row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        let mut var = 0.0;
        for a in 0..p {
            let mut acc = 0.0;
            for b in 0..p {
                acc += self.covariance[a * p + b] * row[b];
            }
            var += row[a] * acc;
        }
        let eta_se = var.max(0.0).sqrt();
        let prob = logistic(eta);
        let extrapolated = s
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .any(|(x, (lo, hi))| x < lo || x > hi);
        Prediction {
            probability: prob,
            std_error: prob * (1.0 - prob) * eta_se,
            eta,
            eta_std_error: eta_se,
            extrapolated,
        }
    }
}

struct Design {
    rows: Vec<f64>,
    p: usize,
}

impl Design {
    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.p..(i + 1) * self.p]
    }
}

fn prepare(
    covered: &[bool],
    summaries: &[Vec<f64>],
    basis_dim: usize,
) -> Result<(Terms, Design, Vec<f64>, Vec<f64>), RegressionError> {
    let m = covered.len();
    if m != summaries.len() {
        return Err(RegressionError::DimensionMismatch);
    }
    if m < 10 {
        return Err(RegressionError::TooFewObservations(m));
    }
    if basis_dim != 0 && basis_dim < 4 {
        return Err(RegressionError::BasisDim(basis_dim));
    }
    let dim = summaries[0].len();
    if summaries.iter().any(|s| s.len() != dim) {
        return Err(RegressionError::DimensionMismatch);
    }
    if let Some(i) = summaries.iter().position(|s| s.iter().any(|x| !x.is_finite())) {
        return Err(RegressionError::NonFinite(i));
    }
    let ones = covered.iter().filter(|c| **c).count();
    if ones == 0 || ones == m {
        return Err(RegressionError::Separation(format!(
            "all {m} responses equal {}",
            ones == m
        )));
    }
    let column = |k: usize| summaries.iter().map(|s| s[k]).collect::<Vec<f64>>();
    let lower: Vec<f64> = (0..dim)
        .map(|k| column(k).into_iter().fold(f64::INFINITY, f64::min))
        .collect();
    let upper: Vec<f64> = (0..dim)
        .map(|k| column(k).into_iter().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let terms = if basis_dim == 0 {
        Terms::Linear { dim }
    } else {
        Terms::Spline {
            bases: (0..dim)
                .map(|k| SplineBasis::from_data(&column(k), basis_dim))
                .collect(),
        }
    };
    let p = terms.n_columns();
    let mut rows = vec![0.0; m * p];
    for (i, s) in summaries.iter().enumerate() {
        terms.row(s, &mut rows[i * p..(i + 1) * p]);
    }
    Ok((terms, Design { rows, p }, lower, upper))
}

struct IrlsResult {
    beta: Vec<f64>,
    covariance: Vec<f64>,
}

fn bernoulli_deviance(y: bool, mu: f64) -> f64 {
    let mu = mu.clamp(1e-15, 1.0 - 1e-15);
    if y {
        -2.0 * mu.ln()
    } else {
        -2.0 * (1.0 - mu).ln()
    }
}

/// Newton/IRLS maximisation of `ℓ(β) − λ Σ_{k≥1} β_k²` over the rows in `idx`.
fn irls(design: &Design, y: &[bool], idx: &[usize], lambda: f64) -> Result<IrlsResult, RegressionError> {
    let p = design.p;
    let ybar = idx.iter().filter(|&&i| y[i]).count() as f64 / idx.len() as f64;
    if ybar == 0.0 || ybar == 1.0 {
        return Err(RegressionError::Separation("constant response in training rows".into()));
    }
    let mut beta = vec![0.0; p];
    beta[0] = logit(ybar);

    let objective = |beta: &[f64]| -> Result<f64, RegressionError> {
        let mut dev = 0.0;
        for &i in idx {
            let eta: f64 = design.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            if eta.abs() > ETA_LIMIT {
                return Err(RegressionError::Separation(format!(
                    "linear predictor reached {eta:.1} on training data"
                )));
            }
            dev += bernoulli_deviance(y[i], logistic(eta));
        }
        Ok(dev + 2.0 * lambda * beta[1..].iter().map(|b| b * b).sum::<f64>())
    };

    let mut dev = objective(&beta)?;
    let mut info = DMatrix::<f64>::zeros(p, p);
    for _ in 0..MAX_ITER {
        // Penalised information X'WX + 2λP and score-based right-hand side X'Wz.
        info.fill(0.0);
        let mut rhs = DVector::<f64>::zeros(p);
        for &i in idx {
            let x = design.row(i);
            let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = logistic(eta);
            let w = (mu * (1.0 - mu)).max(1e-12);
            let z = eta + (if y[i] { 1.0 } else { 0.0 } - mu) / w;
            for a in 0..p {
                let wa = w * x[a];
                if wa == 0.0 {
                    continue;
                }
                rhs[a] += wa * z;
                for b in a..p {
                    info[(a, b)] += wa * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(a, b)] = info[(b, a)];
            }
            if a > 0 {
                info[(a, a)] += 2.0 * lambda;
            }
        }
        let chol = info.clone().cholesky().ok_or(RegressionError::Singular)?;
        let target = chol.solve(&rhs);

        // Step-halving guards against overshooting on near-separated data.
        let mut step = 1.0;
        let (new_beta, new_dev) = loop {
            let cand: Vec<f64> = beta
                .iter()
                .zip(target.iter())
                .map(|(b, t)| b + step * (t - b))
                .collect();
            match objective(&cand) {
                Ok(d) if d <= dev * (1.0 + 1e-12) || step < 1e-6 => break (cand, d),
                Err(e) if step < 1e-6 => return Err(e),
                _ => step *= 0.5,
            }
        };
        let change = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        beta = new_beta;
        dev = new_dev;
        if change < REL_TOL {
            break;
        }
    }

    // Covariance at the converged coefficients.
    info.fill(0.0);
    for &i in idx {
        let x = design.row(i);
        let eta: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        let mu = logistic(eta);
        let w = (mu * (1.0 - mu)).max(1e-12);
        for a in 0..p {
            for b in a..p {
                info[(a, b)] += w * x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[(a, b)] = info[(b, a)];
        }
        if a > 0 {
            info[(a, a)] += 2.0 * lambda;
        }
    }
    let cov = info.cholesky().ok_or(RegressionError::Singular)?.inverse();
    Ok(IrlsResult {
        beta,
        covariance: (0..p * p).map(|k| cov[(k / p, k % p)]).collect(),
    })
}

fn held_out_deviance(design: &Design, y: &[bool], idx: &[usize], beta: &[f64]) -> f64 {
    idx.iter()
        .map(|&i| {
            let eta: f64 = design.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
            bernoulli_deviance(y[i], logistic(eta))
        })
        .sum()
}

fn assemble(
    basis_dim: usize,
    terms: Terms,
    result: IrlsResult,
    lambda: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_obs: usize,
) -> RegressionFit {
    RegressionFit {
        basis_dim,
        terms,
        coefficients: result.beta,
        lambda,
        covariance: result.covariance,
        lower,
        upper,
        n_obs,
    }
}

/// Fit with a fixed ridge strength.
pub fn fit_with_lambda(
    covered: &[bool],
    summaries: &[Vec<f64>],
    basis_dim: usize,
    lambda: f64,
) -> Result<RegressionFit, RegressionError> {
    let (terms, design, lower, upper) = prepare(covered, summaries, basis_dim)?;
    let all: Vec<usize> = (0..covered.len()).collect();
    let result = irls(&design, covered, &all, lambda)?;
    Ok(assemble(basis_dim, terms, result, lambda, lower, upper, covered.len()))
}

/// Fit with the ridge strength chosen from [`LAMBDA_GRID`] by 5-fold
/// cross-validated deviance (row `i` is held out in fold `i mod 5`).
pub fn fit(covered: &[bool], summaries: &[Vec<f64>], basis_dim: usize) -> Result<RegressionFit, RegressionError> {
    let (terms, design, lower, upper) = prepare(covered, summaries, basis_dim)?;
    let m = covered.len();
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..FOLDS)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..m).partition(|i| i % FOLDS == f);
            (train, test)
        })
        .collect();
    let scores: Vec<f64> = LAMBDA_GRID
        .par_iter()
        .map(|&lambda| {
            folds
                .iter()
                .map(|(train, test)| match irls(&design, covered, train, lambda) {
                    Ok(r) => held_out_deviance(&design, covered, test, &r.beta),
                    Err(_) => f64::INFINITY,
                })
                .sum::<f64>()
        })
        .collect();
    // Scan from the strongest penalty so ties favour the smoother fit.
    let mut best: Option<(f64, f64)> = None;
    for (lambda, score) in LAMBDA_GRID.iter().zip(&scores).rev() {
        if score.is_finite() && best.is_none_or(|(_, s)| *score < s) {
            best = Some((*lambda, *score));
        }
    }
    let Some((lambda, _)) = best else {
        return Err(RegressionError::Separation(
            "IRLS diverged for every candidate penalty".into(),
        ));
    };
    let all: Vec<usize> = (0..m).collect();
    let result = irls(&design, covered, &all, lambda)?;
    Ok(assemble(basis_dim, terms, result, lambda, lower, upper, m))
}
