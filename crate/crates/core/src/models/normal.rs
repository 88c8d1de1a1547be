//! Normal prior N(0, 1), observation N(φ, 1), approximated by tempering the
//! likelihood with power `v`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::credible::{CredibleSet, CredibleSetError, SetKind};
use crate::engine::{ApproxPosterior, ExactPosterior, Model, ModelError};
use crate::grid::uniform_grid;
use crate::special::{normal_cdf, normal_log_pdf, normal_quantile};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedNormal {
    v: f64,
}

impl TemperedNormal {
    pub fn new(v: f64) -> Result<Self, ModelError> {
        if v.is_finite() && v >= 0.0 {
            Ok(Self { v })
        } else {
            Err(ModelError(format!("tempering power must be finite and >= 0, got {v}")))
        }
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// Importance weights have finite variance only for v < 2.
    pub fn clt_regime(&self) -> bool {
        self.v < 2.0
    }

    pub fn posterior(&self, y: f64) -> NormalPosterior {
        NormalPosterior {
            mean: self.v * y / (1.0 + self.v),
            var: 1.0 / (1.0 + self.v),
            y,
            v: self.v,
        }
    }

    pub fn exact(&self, y: f64) -> Gaussian {
        Gaussian {
            mean: y / 2.0,
            var: 0.5,
        }
    }
}

/// Operational coverage b(y) of the equal-tailed level-α interval of the
/// tempered posterior, under the exact posterior N(y/2, 1/2).
pub fn exact_coverage(y: f64, alpha: f64, v: f64) -> f64 {
    let z = normal_quantile((1.0 + alpha) / 2.0);
    let mean = v * y / (1.0 + v);
    let half = z * (1.0 / (1.0 + v)).sqrt();
    let s = std::f64::consts::SQRT_2;
    normal_cdf(s * (mean + half - y / 2.0)) - normal_cdf(s * (mean - half - y / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian {
    pub mean: f64,
    pub var: f64,
}

impl Gaussian {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.var.sqrt() * z
    }

    pub fn cdf(&self, x: f64) -> f64 {
        normal_cdf((x - self.mean) / self.var.sqrt())
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.mean + self.var.sqrt() * normal_quantile(p)
    }
}

impl ExactPosterior for Gaussian {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng)
    }

    fn cdf(&self, phi: f64) -> f64 {
        Gaussian::cdf(self, phi)
    }
}

/// Tempered posterior N(vy/(1+v), 1/(1+v)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalPosterior {
    pub mean: f64,
    pub var: f64,
    y: f64,
    v: f64,
}

impl NormalPosterior {
    fn gaussian(&self) -> Gaussian {
        Gaussian {
            mean: self.mean,
            var: self.var,
        }
    }
}

impl ApproxPosterior for NormalPosterior {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let g = self.gaussian();
        (0..count).map(|_| g.draw(rng)).collect()
    }

    fn unnormalized_density(&self, theta: f64) -> f64 {
        (-(theta - self.mean).powi(2) / (2.0 * self.var)).exp()
    }

    /// v · log N(y; φ, 1).
    fn log_approx_likelihood(&self, phi: f64) -> f64 {
        if self.v == 0.0 {
            return 0.0;
        }
        self.v * normal_log_pdf(self.y, phi, 1.0)
    }

    fn cdf(&self, theta: f64) -> f64 {
        self.gaussian().cdf(theta)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.gaussian().quantile(p)
    }

    fn credible_set(&self, alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CredibleSetError::InvalidLevel(alpha));
        }
        let sd = self.var.sqrt();
        match kind {
            SetKind::EqualTail | SetKind::Hpd => {
                let half = normal_quantile((1.0 + alpha) / 2.0) * sd;
                Ok(CredibleSet::interval(kind, alpha, self.mean - half, self.mean + half))
            }
            SetKind::LowerTail => Ok(CredibleSet::interval(
                kind,
                alpha,
                f64::NEG_INFINITY,
                self.mean + sd * normal_quantile(alpha),
            )),
            SetKind::DiscreteHpd => Err(CredibleSetError::UnsupportedKind(kind)),
        }
    }
}

impl Model for TemperedNormal {
    type Data = f64;
    type Posterior = NormalPosterior;
    type Exact = Gaussian;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        StandardNormal.sample(rng)
    }

    fn simulate<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> Result<f64, ModelError> {
        let e: f64 = StandardNormal.sample(rng);
        Ok(phi + e)
    }

    fn approx_posterior(&self, y: &f64) -> Result<NormalPosterior, ModelError> {
        Ok(self.posterior(*y))
    }

    fn summary(&self, y: &f64) -> Vec<f64> {
        vec![*y]
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn exact_posterior(&self, y: &f64) -> Option<Gaussian> {
        Some(self.exact(*y))
    }

    fn parameter_grid(&self) -> Vec<f64> {
        uniform_grid(-8.0, 8.0, 2001)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::ks_grid;
    use crate::rng::replicate_rng;

    #[test]
    fn posterior_moments() {
        let p = TemperedNormal::new(1.0).unwrap().posterior(2.0);
        assert_eq!((p.mean, p.var), (1.0, 0.5));
        let p = TemperedNormal::new(0.0).unwrap().posterior(5.0);
        assert_eq!((p.mean, p.var), (0.0, 1.0));
        let p = TemperedNormal::new(3.0).unwrap().posterior(4.0);
        assert_eq!((p.mean, p.var), (3.0, 0.25));
        assert!(TemperedNormal::new(-0.1).is_err());
    }

    #[test]
    fn exact_posterior_moments() {
        let m = TemperedNormal::new(0.3).unwrap();
        assert_eq!(m.exact(0.0), Gaussian { mean: 0.0, var: 0.5 });
        assert_eq!(m.exact(4.0).mean, 2.0);
        assert_eq!(m.exact(4.0).cdf(2.0), 0.5);
    }

    #[test]
    fn coverage_at_v1_is_nominal() {
        for y in [-3.0, -0.4, 0.0, 1.7, 5.0] {
            for a in [0.1, 0.5, 0.9, 0.99] {
                assert!((exact_coverage(y, a, 1.0) - a).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn coverage_at_v0() {
        // Reference values by adaptive quadrature of the exact posterior density.
        assert!((exact_coverage(0.0, 0.9, 0.0) - 0.97999074628388).abs() < 1e-12);
        assert!((exact_coverage(2.0, 0.9, 0.0) - 0.81901344054795).abs() < 1e-12);
    }

    #[test]
    fn coverage_by_monte_carlo() {
        let mut rng = replicate_rng(11, 0);
        let exact = TemperedNormal::new(0.0).unwrap().exact(2.0);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| ExactPosterior::sample(&exact, &mut rng).abs() <= 1.6448536269514722)
            .count();
        let p = hits as f64 / n as f64;
        let b = exact_coverage(2.0, 0.9, 0.0);
        assert!((p - b).abs() < 4.0 * (b * (1.0 - b) / n as f64).sqrt());
    }

    #[test]
    fn coverage_tends_to_nominal_as_v_tends_to_one() {
        let ys: Vec<f64> = (-30..=30).map(|k| k as f64 / 10.0).collect();
        let mut prev = f64::INFINITY;
        for v in [0.9, 0.99, 0.999] {
            let gap = ys
                .iter()
                .map(|&y| (exact_coverage(y, 0.9, v) - 0.9).abs())
                .fold(0.0, f64::max);
            assert!(gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn dispersion_sign_pattern() {
        for v in [0.0, 0.3, 0.8] {
            assert!(exact_coverage(0.0, 0.9, v) >= 0.9);
        }
        assert!(exact_coverage(0.0, 0.9, 1.1) <= 0.9);
    }

    #[test]
    fn credible_set_mass() {
        let p = TemperedNormal::new(0.7).unwrap().posterior(1.3);
        for kind in [SetKind::EqualTail, SetKind::Hpd, SetKind::LowerTail] {
            let (lo, hi) = p.credible_set(0.8, kind).unwrap().bounds().unwrap();
            assert!((p.cdf(hi) - p.cdf(lo) - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn ks_grid_shrinks_towards_observed() {
        let m = TemperedNormal::new(0.5).unwrap();
        let grid = m.parameter_grid();
        let cdf = |y: f64| -> Vec<f64> { grid.iter().map(|t| m.posterior(y).cdf(*t)).collect() };
        let reference = cdf(1.0);
        let d: Vec<f64> = [3.0, 2.5, 2.0, 1.5, 1.2, 1.0]
            .iter()
            .map(|&yp| ks_grid(&cdf(yp), &reference).unwrap())
            .collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(d[5], 0.0);
    }
}
