//! Binary Ising field on an N×N lattice with coupling φ ∈ [0, 2]:
//! p(y|φ) ∝ exp(−φ f(y; E)), where f counts edges joining unequal cells.
//!
//! Data are simulated with free boundaries. The approximate posterior keeps
//! the free-boundary statistic but swaps in the periodic partition function;
//! the exact posterior uses the free one. Both partition functions are exact,
//! via column transfer matrices over the 2^N column states.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::credible::{interval_from_grid, CredibleSet, CredibleSetError, SetKind};
use crate::engine::{ApproxPosterior, ExactPosterior, Model, ModelError};
use crate::grid::{uniform_grid, GridDensity, GridError};
use crate::special::{log_sum_exp, logistic};

/// Largest side length handled by the transfer matrix.
pub const MAX_TRANSFER_N: usize = 12;
/// Largest side length for which periodic densities of states are tabulated.
pub const MAX_PERIODIC_DOS_N: usize = 8;

pub const DEFAULT_SWEEPS: usize = 2000;
pub const DEFAULT_GRID_POINTS: usize = 2001;
pub const PHI_MAX: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsingError {
    #[error("lattice side {0} exceeds the transfer-matrix limit {MAX_TRANSFER_N}")]
    SizeLimit(usize),
    #[error("lattice side must be at least 2, got {0}")]
    TooSmall(usize),
    #[error("lattice needs {expected} cells, got {got}")]
    CellCount { expected: usize, got: usize },
    #[error("cell values must be 0 or 1")]
    CellValue,
    #[error("cannot parse lattice: {0}")]
    Parse(String),
    #[error("posterior density underflows on the whole grid")]
    DegenerateDensity,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Free,
    Periodic,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Free => "free",
            Boundary::Periodic => "periodic",
        })
    }
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "free" => Ok(Boundary::Free),
            "periodic" => Ok(Boundary::Periodic),
            other => Err(format!("unknown boundary `{other}`")),
        }
    }
}

/// Edge list of the N×N lattice, cells numbered row-major.
///
/// Periodic lattices join every cell to its right and lower neighbour modulo
/// N, so at N = 2 each neighbouring pair is joined by two edges.
pub fn edges(n: usize, boundary: Boundary) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for r in 0..n {
        for c in 0..n {
            let u = r * n + c;
            match boundary {
                Boundary::Free => {
                    if c + 1 < n {
                        out.push((u, u + 1));
                    }
                    if r + 1 < n {
                        out.push((u, u + n));
                    }
                }
                Boundary::Periodic => {
                    out.push((u, r * n + (c + 1) % n));
                    out.push((u, ((r + 1) % n) * n + c));
                }
            }
        }
    }
    out
}

pub fn edge_count(n: usize, boundary: Boundary) -> usize {
    match boundary {
        Boundary::Free => 2 * n * (n - 1),
        Boundary::Periodic => 2 * n * n,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsingLattice {
    n: usize,
    boundary: Boundary,
    cells: Vec<u8>,
}

impl IsingLattice {
    pub fn new(n: usize, boundary: Boundary, cells: Vec<u8>) -> Result<Self, IsingError> {
        if n < 2 {
            return Err(IsingError::TooSmall(n));
        }
        if cells.len() != n * n {
            return Err(IsingError::CellCount {
                expected: n * n,
                got: cells.len(),
            });
        }
        if cells.iter().any(|c| *c > 1) {
            return Err(IsingError::CellValue);
        }
        Ok(Self { n, boundary, cells })
    }

    pub fn constant(n: usize, boundary: Boundary, value: u8) -> Result<Self, IsingError> {
        Self::new(n, boundary, vec![value; n * n])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.cells[r * self.n + c]
    }

    pub fn with_boundary(&self, boundary: Boundary) -> Self {
        Self {
            boundary,
            ..self.clone()
        }
    }

    /// Rows of `0`/`1` characters; blank lines are ignored.
    pub fn from_text(text: &str, boundary: Boundary) -> Result<Self, IsingError> {
        let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
        let n = rows.len();
        let mut cells = Vec::with_capacity(n * n);
        for (k, row) in rows.iter().enumerate() {
            if row.chars().count() != n {
                return Err(IsingError::Parse(format!(
                    "row {} has {} cells, expected {n}",
                    k + 1,
                    row.chars().count()
                )));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(IsingError::Parse(format!("unexpected character `{other}`"))),
                });
            }
        }
        Self::new(n, boundary, cells)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n * (self.n + 1));
        for row in self.cells.chunks(self.n) {
            s.extend(row.iter().map(|c| if *c == 1 { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }
}

/// f(y; E): edges of the lattice's own boundary type joining unequal cells.
pub fn edge_discrepancy(lattice: &IsingLattice) -> usize {
    edges(lattice.n, lattice.boundary)
        .into_iter()
        .filter(|(u, v)| lattice.cells[*u] != lattice.cells[*v])
        .count()
}

fn check_transfer_size(n: usize) -> Result<(), IsingError> {
    if n < 2 {
        Err(IsingError::TooSmall(n))
    } else if n > MAX_TRANSFER_N {
        Err(IsingError::SizeLimit(n))
    } else {
        Ok(())
    }
}

/// Unequal vertical bonds within one column state.
fn column_discrepancy(state: usize, n: usize, boundary: Boundary) -> u32 {
    let bit = |r: usize| (state >> r) & 1;
    let pairs = match boundary {
        Boundary::Free => n - 1,
        Boundary::Periodic => n,
    };
    (0..pairs).filter(|&r| bit(r) != bit((r + 1) % n)).count() as u32
}

/// v ← H v, where H[s][t] = e^{popcount(s⊕t)}: one factor [[1, e], [e, 1]]
/// per row.
fn apply_horizontal(v: &mut [f64], n: usize, e: f64) {
    for r in 0..n {
        let bit = 1 << r;
        for i in 0..v.len() {
            if i & bit == 0 {
                let (a, b) = (v[i], v[i | bit]);
                v[i] = a + e * b;
                v[i | bit] = e * a + b;
            }
        }
    }
}

/// Rescale `v` by its maximum, returning the log of the factor removed.
fn rescale(v: &mut [f64]) -> f64 {
    let m = v.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        v.iter_mut().for_each(|x| *x /= m);
        m.ln()
    } else {
        0.0
    }
}

/// log Z(φ) = log Σ_y exp(−φ f(y; E)) by column transfer matrices.
pub fn log_partition(n: usize, boundary: Boundary, phi: f64) -> Result<f64, IsingError> {
    check_transfer_size(n)?;
    let states = 1usize << n;
    let e = (-phi).exp();
    let diag: Vec<f64> = (0..states)
        .map(|s| (-phi * f64::from(column_discrepancy(s, n, boundary))).exp())
        .collect();
    match boundary {
        Boundary::Free => {
            let mut v = diag.clone();
            let mut log_scale = rescale(&mut v);
            for _ in 1..n {
                apply_horizontal(&mut v, n, e);
                v.iter_mut().zip(&diag).for_each(|(x, d)| *x *= d);
                log_scale += rescale(&mut v);
            }
            Ok(log_scale + v.iter().sum::<f64>().ln())
        }
        Boundary::Periodic => {
            // Tr((D H)^N), one chain per starting column state.
            let mut terms = Vec::with_capacity(states);
            let mut v = vec![0.0; states];
            for s in 0..states {
                v.fill(0.0);
                v[s] = 1.0;
                let mut log_scale = 0.0;
                for _ in 0..n {
                    apply_horizontal(&mut v, n, e);
                    v.iter_mut().zip(&diag).for_each(|(x, d)| *x *= d);
                    log_scale += rescale(&mut v);
                }
                terms.push(log_scale + v[s].ln());
            }
            Ok(log_sum_exp(terms))
        }
    }
}

/// Density of states: n_k = #{y : f(y; E) = k}, so Z(φ) = Σ_k n_k e^{−φk}.
/// Counts are held as floats (exact up to 2^53).
pub fn density_of_states(n: usize, boundary: Boundary) -> Result<Vec<f64>, IsingError> {
    check_transfer_size(n)?;
    if boundary == Boundary::Periodic && n > MAX_PERIODIC_DOS_N {
        return Err(IsingError::SizeLimit(n));
    }
    let states = 1usize << n;
    let len = edge_count(n, boundary) + 1;
    let vert: Vec<usize> = (0..states)
        .map(|s| column_discrepancy(s, n, boundary) as usize)
        .collect();

    // Polynomial vectors in x = e^{−φ}: `v[s * len + k]` is the coefficient of x^k.
    let horizontal = |v: &mut Vec<f64>| {
        for r in 0..n {
            let bit = 1 << r;
            for i in 0..states {
                if i & bit == 0 {
                    let j = i | bit;
                    for k in (0..len).rev() {
                        let (a, b) = (v[i * len + k], v[j * len + k]);
                        let (a_prev, b_prev) = if k > 0 {
                            (v[i * len + k - 1], v[j * len + k - 1])
                        } else {
                            (0.0, 0.0)
                        };
                        v[i * len + k] = a + b_prev;
                        v[j * len + k] = b + a_prev;
                    }
                }
            }
        }
    };
    let diagonal = |v: &mut Vec<f64>| {
        for (s, &d) in vert.iter().enumerate() {
            if d > 0 {
                let row = &mut v[s * len..(s + 1) * len];
                row.copy_within(0..len - d, d);
                row[..d].fill(0.0);
            }
        }
    };

    let mut dos = vec![0.0; len];
    match boundary {
        Boundary::Free => {
            let mut v = vec![0.0; states * len];
            for s in 0..states {
                v[s * len] = 1.0;
            }
            diagonal(&mut v);
            for _ in 1..n {
                horizontal(&mut v);
                diagonal(&mut v);
            }
            for s in 0..states {
                dos.iter_mut()
                    .zip(&v[s * len..(s + 1) * len])
                    .for_each(|(d, x)| *d += x);
            }
        }
        Boundary::Periodic => {
            let mut v = vec![0.0; states * len];
            for s in 0..states {
                v.fill(0.0);
                v[s * len] = 1.0;
                for _ in 0..n {
                    horizontal(&mut v);
                    diagonal(&mut v);
                }
                dos.iter_mut()
                    .zip(&v[s * len..(s + 1) * len])
                    .for_each(|(d, x)| *d += x);
            }
        }
    }
    Ok(dos)
}

/// log Z over a uniform φ-grid on [0, 2].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionTable {
    n: usize,
    boundary: Boundary,
    grid: Vec<f64>,
    log_z: Vec<f64>,
    /// log n_k, when the density of states is available; −∞ for empty levels.
    log_dos: Option<Vec<f64>>,
}

impl PartitionTable {
    pub fn new(n: usize, boundary: Boundary, points: usize) -> Result<Self, IsingError> {
        check_transfer_size(n)?;
        let grid = uniform_grid(0.0, PHI_MAX, points);
        let log_dos = density_of_states(n, boundary)
            .ok()
            .map(|d| d.iter().map(|c| c.ln()).collect::<Vec<f64>>());
        let log_z = match &log_dos {
            Some(ld) => grid.iter().map(|&phi| dos_log_z(ld, phi)).collect(),
            None => grid
                .iter()
                .map(|&phi| log_partition(n, boundary, phi))
                .collect::<Result<_, _>>()?,
        };
        Ok(Self {
            n,
            boundary,
            grid,
            log_z,
            log_dos,
        })
    }

    /// Table with externally supplied values, e.g. a flat stub.
    pub fn from_values(n: usize, boundary: Boundary, grid: Vec<f64>, log_z: Vec<f64>) -> Self {
        assert_eq!(grid.len(), log_z.len());
        Self {
            n,
            boundary,
            grid,
            log_z,
            log_dos: None,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn log_z_values(&self) -> &[f64] {
        &self.log_z
    }

    /// log Z(φ): exact from the density of states, else interpolated.
    pub fn log_z(&self, phi: f64) -> f64 {
        if let Some(ld) = &self.log_dos {
            return dos_log_z(ld, phi);
        }
        let g = &self.grid;
        let k = g.partition_point(|x| *x <= phi).clamp(1, g.len() - 1);
        let t = (phi - g[k - 1]) / (g[k] - g[k - 1]);
        self.log_z[k - 1] + t * (self.log_z[k] - self.log_z[k - 1])
    }
}

fn dos_log_z(log_dos: &[f64], phi: f64) -> f64 {
    log_sum_exp(log_dos.iter().enumerate().map(|(k, l)| l - phi * k as f64))
}

/// Flat-prior posterior over φ ∝ exp(−φ s) / Z(φ) on the table's grid.
pub fn posterior_grid(statistic: f64, table: &PartitionTable) -> Result<GridDensity, IsingError> {
    let log_density: Vec<f64> = table
        .grid
        .iter()
        .zip(&table.log_z)
        .map(|(phi, lz)| -phi * statistic - lz)
        .collect();
    GridDensity::from_log_density(table.grid.clone(), &log_density).map_err(|e| match e {
        GridError::NonIntegrable => IsingError::DegenerateDensity,
        other => IsingError::Grid(other),
    })
}

/// Heat-bath sampler state for one lattice geometry.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    n: usize,
    boundary: Boundary,
    /// Neighbours of each cell, with multiplicity.
    neighbours: Vec<Vec<usize>>,
}

impl GibbsSampler {
    pub fn new(n: usize, boundary: Boundary) -> Self {
        let mut neighbours = vec![Vec::new(); n * n];
        for (u, v) in edges(n, boundary) {
            neighbours[u].push(v);
            neighbours[v].push(u);
        }
        Self {
            n,
            boundary,
            neighbours,
        }
    }

    /// `sweeps` raster-order passes of single-site Gibbs updates from a
    /// uniformly random start.
    pub fn simulate<R: Rng + ?Sized>(&self, phi: f64, sweeps: usize, rng: &mut R) -> IsingLattice {
        let max_deg = self.neighbours.iter().map(Vec::len).max().unwrap_or(0);
        // p1[deg][ones] = P(cell = 1 | neighbours), cost e^{−φ} per unequal edge.
        let p1: Vec<Vec<f64>> = (0..=max_deg)
            .map(|deg| {
                (0..=deg)
                    .map(|ones| logistic(phi * (2.0 * ones as f64 - deg as f64)))
                    .collect()
            })
            .collect();
        let mut cells: Vec<u8> = (0..self.n * self.n).map(|_| u8::from(rng.random::<bool>())).collect();
        for _ in 0..sweeps {
            for u in 0..cells.len() {
                let nb = &self.neighbours[u];
                let ones = nb.iter().filter(|&&v| cells[v] == 1).count();
                cells[u] = u8::from(rng.random::<f64>() < p1[nb.len()][ones]);
            }
        }
        IsingLattice {
            n: self.n,
            boundary: self.boundary,
            cells,
        }
    }
}

pub fn simulate_field<R: Rng + ?Sized>(
    n: usize,
    boundary: Boundary,
    phi: f64,
    sweeps: usize,
    rng: &mut R,
) -> IsingLattice {
    GibbsSampler::new(n, boundary).simulate(phi, sweeps, rng)
}

/// Posterior over φ on a grid, together with the partition function its
/// likelihood uses.
#[derive(Debug, Clone)]
pub struct IsingPosterior {
    density: Arc<GridDensity>,
    table: Arc<PartitionTable>,
    statistic: f64,
}

impl IsingPosterior {
    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }
}

impl ApproxPosterior for IsingPosterior {
    fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        (0..count).map(|_| self.density.sample(rng)).collect()
    }

    fn unnormalized_density(&self, theta: f64) -> f64 {
        self.density.density_at(theta)
    }

    fn log_approx_likelihood(&self, phi: f64) -> f64 {
        -phi * self.statistic - self.table.log_z(phi)
    }

    fn cdf(&self, theta: f64) -> f64 {
        self.density.cdf(theta)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.density.quantile(p)
    }

    fn credible_set(&self, alpha: f64, kind: SetKind) -> Result<CredibleSet, CredibleSetError> {
        interval_from_grid(&self.density, alpha, kind)
    }
}

impl ExactPosterior for IsingPosterior {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.density.sample(rng)
    }

    fn cdf(&self, phi: f64) -> f64 {
        self.density.cdf(phi)
    }
}

/// Free-boundary Ising data with flat prior on [0, 2], approximated with the
/// periodic partition function.
#[derive(Debug, Clone)]
pub struct IsingModel {
    n: usize,
    sweeps: usize,
    sampler: GibbsSampler,
    approx: Vec<IsingPosterior>,
    exact: Vec<IsingPosterior>,
}

impl IsingModel {
    pub fn new(n: usize) -> Result<Self, IsingError> {
        Self::with_settings(n, DEFAULT_SWEEPS, DEFAULT_GRID_POINTS)
    }

    pub fn with_settings(n: usize, sweeps: usize, grid_points: usize) -> Result<Self, IsingError> {
        check_transfer_size(n)?;
        let periodic = Arc::new(PartitionTable::new(n, Boundary::Periodic, grid_points)?);
        let free = Arc::new(PartitionTable::new(n, Boundary::Free, grid_points)?);
        // One posterior per attainable statistic value.
        let build = |table: &Arc<PartitionTable>| {
            (0..=edge_count(n, Boundary::Free))
                .map(|s| {
                    Ok(IsingPosterior {
                        density: Arc::new(posterior_grid(s as f64, table)?),
                        table: Arc::clone(table),
                        statistic: s as f64,
                    })
                })
                .collect::<Result<Vec<_>, IsingError>>()
        };
        Ok(Self {
            n,
            sweeps: sweeps.max(1),
            sampler: GibbsSampler::new(n, Boundary::Free),
            approx: build(&periodic)?,
            exact: build(&free)?,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    fn statistic(&self, y: &IsingLattice) -> usize {
        edge_discrepancy(&y.with_boundary(Boundary::Free))
    }

    fn check(&self, y: &IsingLattice) -> Result<(), ModelError> {
        if y.n() != self.n {
            return Err(ModelError(format!(
                "lattice side {} does not match model side {}",
                y.n(),
                self.n
            )));
        }
        Ok(())
    }

    pub fn exact_posterior_at(&self, y: &IsingLattice) -> Result<IsingPosterior, ModelError> {
        self.check(y)?;
        Ok(self.exact[self.statistic(y)].clone())
    }
}

impl Model for IsingModel {
    type Data = IsingLattice;
    type Posterior = IsingPosterior;
    type Exact = IsingPosterior;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.random_range(0.0..PHI_MAX)
    }

    fn simulate<R: Rng + ?Sized>(&self, phi: f64, rng: &mut R) -> Result<IsingLattice, ModelError> {
        Ok(self.sampler.simulate(phi, self.sweeps, rng))
    }

    fn approx_posterior(&self, y: &IsingLattice) -> Result<IsingPosterior, ModelError> {
        self.check(y)?;
        Ok(self.approx[self.statistic(y)].clone())
    }

    fn summary(&self, y: &IsingLattice) -> Vec<f64> {
        vec![self.statistic(y) as f64]
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn exact_posterior(&self, y: &IsingLattice) -> Option<IsingPosterior> {
        self.exact_posterior_at(y).ok()
    }

    fn parameter_grid(&self) -> Vec<f64> {
        self.approx[0].density.grid().to_vec()
    }
}
