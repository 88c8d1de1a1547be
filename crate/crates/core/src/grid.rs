//! Densities tabulated on a grid.
//!
//! The CDF is the cumulative trapezoid mass, linearly interpolated between
//! grid points; `quantile` is its exact left-continuous inverse. Sampling,
//! quantiles and credible intervals therefore all agree with `cdf` to
//! rounding error.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least two strictly increasing points")]
    BadGrid,
    #[error("density and grid lengths differ ({density} vs {grid})")]
    LengthMismatch { grid: usize, density: usize },
    #[error("density has zero or non-finite total mass")]
    NonIntegrable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    cdf: Vec<f64>,
}

impl GridDensity {
    /// Normalise a nonnegative density tabulated on `grid`.
    pub fn from_unnormalized(grid: Vec<f64>, values: Vec<f64>) -> Result<Self, GridError> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GridError::BadGrid);
        }
        if grid.len() != values.len() {
            return Err(GridError::LengthMismatch {
                grid: grid.len(),
                density: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(GridError::NonIntegrable);
        }
        let mut cum = Vec::with_capacity(grid.len());
        cum.push(0.0);
        let mut total = 0.0;
        for k in 1..grid.len() {
            total += 0.5 * (values[k] + values[k - 1]) * (grid[k] - grid[k - 1]);
            cum.push(total);
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(GridError::NonIntegrable);
        }
        let density = values.iter().map(|v| v / total).collect();
        let mut cdf: Vec<f64> = cum.iter().map(|c| c / total).collect();
        *cdf.last_mut().unwrap() = 1.0;
        Ok(Self { grid, density, cdf })
    }

    /// Normalise `exp(log_values)` after shifting by the maximum.
    pub fn from_log_density(grid: Vec<f64>, log_values: &[f64]) -> Result<Self, GridError> {
        let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(GridError::NonIntegrable);
        }
        let values = log_values.iter().map(|l| (l - max).exp()).collect();
        Self::from_unnormalized(grid, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Normalised density values at the grid points.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// CDF values at the grid points.
    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Index `k` of the cell `[grid[k], grid[k+1]]` containing `x` (clamped).
    fn cell(&self, x: f64) -> usize {
        let n = self.grid.len();
        match self.grid.partition_point(|g| *g <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn density_at(&self, x: f64) -> f64 {
        if x < self.lower() || x > self.upper() {
            return 0.0;
        }
        let k = self.cell(x);
        let t = (x - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        self.density[k] + t * (self.density[k + 1] - self.density[k])
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        if x >= self.upper() {
            return 1.0;
        }
        let k = self.cell(x);
        let t = (x - self.grid[k]) / (self.grid[k + 1] - self.grid[k]);
        self.cdf[k] + t * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Smallest `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.lower();
        }
        if p >= 1.0 {
            // Last point with any mass to its left.
            let k = self.cdf.partition_point(|c| *c < 1.0);
            return self.grid[k.min(self.grid.len() - 1)];
        }
        let k = self.cdf.partition_point(|c| *c < p);
        // cdf[k-1] < p <= cdf[k]
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = (p - c0) / (c1 - c0);
        self.grid[k - 1] + t * (self.grid[k] - self.grid[k - 1])
    }

    /// Mass of each grid cell `[grid[k], grid[k+1]]`.
    pub fn cell_masses(&self) -> Vec<f64> {
        self.cdf.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }

    pub fn mean(&self) -> f64 {
        // Exact for the piecewise-uniform law implied by the linear CDF.
        self.cell_masses()
            .iter()
            .enumerate()
            .map(|(k, m)| m * 0.5 * (self.grid[k] + self.grid[k + 1]))
            .sum()
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "uniform grid needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect()
}
