//! A small model with a discrete parameter: φ ∈ {0, …, K−1} uniform a
//! priori, data y ~ Binomial(n, (φ+1)/(K+1)). The approximation tempers the
//! likelihood by `v`, as in the normal model.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::credible::{discrete_hpd_set, CredibleSet, CredibleSetError, SetKind};
use crate::engine::{ApproxPosterior, ExactPosterior, Model, ModelError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Categorical {
    labels: usize,
    trials: u64,
    v: f64,
}

impl Categorical {
    pub fn new(labels: usize, trials: u64, v: f64) -> Result<Self, ModelError> {
        if labels < 2 || trials == 0 || !(v.is_finite() && v >= 0.0) {
            return Err(ModelError(format!(
                "need >= 2 labels, >= 1 trial and finite v >= 0; got {labels}, {trials}, {v}"
            )));
        }
        Ok(Self { labels, trials, v })
    }

    fn success(&self, label: usize) -> f64 {
        (label + 1) as f64 / (self.labels + 1) as f64
    }

    /// log Binomial(y; n, p_φ) up to a term free of φ.
    fn log_lik(&self, y: u64, label: usize) -> f64 {
        let p = self.success(label);
        y as f64 * p.ln() + (self.trials - y) as f64 * (1.0 - p).ln()
    }

    pub fn posterior(&self, y: u64, power: f64) -> LabelPosterior {
        let logs: Vec<f64> = (0..self.labels).map(|l| power * self.log_lik(y, l)).collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = w.iter().sum();
        LabelPosterior {
            masses: w.iter().map(|x| x / total).collect(),
            model: *self,
            y,
            power,
        }
    }
}

/// Posterior masses over labels 0..K.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPosterior {
    masses: Vec<f64>,
    model: Categorical,
    y: u64,
    power: f64,
}

impl LabelPosterior {
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (l, m) in self.masses.iter().enumerate() {
            acc += m;
            if u < acc {
                return l as f64;
            }
        }
        (self.masses.len() - 1) as f64
    }

    fn label_cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let top = (x.floor() as usize).min(self.masses.len() - 1);
        self.masses[..=top].iter().sum::<f64>().min(1.0)
    }
}

impl ApproxPosterior for LabelPosterior {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    fn unnormalized_density(&self, theta: f64) -> f64 {
        if theta.fract() != 0.0 || theta < 0.0 {
            return 0.0;
        }
        self.masses.get(theta as usize).copied().unwrap_or(0.0)
    }

    fn log_approx_likelihood(&self, phi: f64) -> f64 {
        self.power * self.model.log_lik(self.y, phi.round() as usize)
    }

    fn cdf(&self, theta: f64) -> f64 {
        self.label_cdf(theta)
    }

    fn quantile(&self, p: f64) -> f64 {
        let mut acc = 0.0;
        for (l, m) in self.masses.iter().enumerate() {
            acc += m;
            if acc >= p {
                return l as f64;
            }
        }
        (self.masses.len() - 1) as f64
    }

    fn probabilities(&self) -> Option<Vec<(i64, f64)>> {
        Some(self.masses.iter().enumerate().map(|(l, m)| (l as i64, *m)).collect())
    }

    fn credible_set(&self, alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError> {
        match kind {
            SetKind::DiscreteHpd => discrete_hpd_set(&self.probabilities().unwrap(), alpha),
            other => Err(CredibleSetError::UnsupportedKind(other)),
        }
    }
}

impl ExactPosterior for LabelPosterior {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng)
    }

    fn cdf(&self, phi: f64) -> f64 {
        self.label_cdf(phi)
    }
}

impl Model for Categorical {
    type Data = u64;
    type Posterior = LabelPosterior;
    type Exact = LabelPosterior;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(0..self.labels) as f64
    }

    fn simulate<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> Result<u64, ModelError> {
        let b =
            Binomial::new(self.trials, self.success(phi.round() as usize)).map_err(|e| ModelError(e.to_string()))?;
        Ok(b.sample(rng))
    }

    fn approx_posterior(&self, y: &u64) -> Result<LabelPosterior, ModelError> {
        Ok(self.posterior(*y, self.v))
    }

    fn summary(&self, y: &u64) -> Vec<f64> {
        vec![*y as f64]
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn exact_posterior(&self, y: &u64) -> Option<LabelPosterior> {
        Some(self.posterior(*y, 1.0))
    }

    fn parameter_grid(&self) -> Vec<f64> {
        (0..self.labels).map(|l| l as f64).collect()
    }
}
