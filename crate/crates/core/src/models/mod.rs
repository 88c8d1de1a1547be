//! Built-in models: the tempered normal with closed-form coverage, the
//! Ising smoothing model with exact partition functions, and a discrete toy.

pub mod categorical;
pub mod ising;
pub mod normal;

pub use categorical::{Categorical, LabelPosterior};
pub use ising::{
    edge_discrepancy, log_partition, posterior_grid, simulate_field, Boundary, IsingError, IsingLattice, IsingModel,
    IsingPosterior, PartitionTable,
};
pub use normal::{exact_coverage, Gaussian, NormalPosterior, TemperedNormal};
