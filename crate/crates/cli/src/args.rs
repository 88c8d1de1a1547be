use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use covcal::io::KeyValues;

#[derive(Debug, Parser)]
#[command(
    name = "covcal",
    version,
    about = "Coverage calibration for approximate Bayesian credible sets"
)]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate coverage at observed data with one algorithm.
    Calibrate(CalibrateArgs),
    /// Emit the data series behind one of the standard figures.
    Figure(FigureArgs),
    /// Coverage, ESS and window size over a descending list of radii.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    TemperedNormal,
    Ising,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Oracle,
    Regress,
    Is,
    Curve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistanceArg {
    Ks,
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetKindArg {
    Hpd,
    EqualTail,
    LowerTail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetSourceArg {
    Exact,
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    #[value(name = "fig1-topleft")]
    Fig1TopLeft,
    #[value(name = "fig1-bottom")]
    Fig1Bottom,
    #[value(name = "fig3-left")]
    Fig3Left,
    #[value(name = "fig3-right")]
    Fig3Right,
}

/// Model, estimator and output settings shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Flat `key = value` file with the same keys as the long flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum, default_value = "tempered-normal")]
    pub model: ModelKind,

    /// Tempering power of the normal model's approximate likelihood.
    #[arg(long, default_value_t = 1.0)]
    pub v: f64,

    /// Ising lattice side, when no lattice file is given.
    #[arg(long, default_value_t = 4)]
    pub ising_n: usize,

    /// Observed Ising lattice: rows of 0/1 characters.
    #[arg(long, value_name = "FILE")]
    pub ising_data: Option<PathBuf>,

    /// Gibbs sweeps per simulated Ising field.
    #[arg(long, default_value_t = 2000)]
    pub sweeps: usize,

    /// Observed datum of the normal model.
    #[arg(long, allow_hyphen_values = true)]
    pub y: Option<f64>,

    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,

    /// Replicates M.
    #[arg(long, default_value_t = 1000)]
    pub m: usize,

    /// Posterior draws J per replicate.
    #[arg(long, default_value_t = 100)]
    pub j: usize,

    /// Window radius for the importance sampler.
    #[arg(long, default_value_t = f64::INFINITY)]
    pub rho: f64,

    #[arg(long, value_enum, default_value = "summary")]
    pub distance: DistanceArg,

    #[arg(long, value_enum, default_value = "equal-tail")]
    pub set_kind: SetKindArg,

    /// Credible sets exact under the approximate posterior, or estimated from J draws.
    #[arg(long, value_enum, default_value = "exact")]
    pub set_source: SetSourceArg,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads (0: all cores). Output does not depend on it.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,

    /// Spline basis size per summary (0: linear logistic regression).
    #[arg(long, default_value_t = 10)]
    pub basis_dim: usize,

    #[arg(long, default_value_t = 512)]
    pub curve_points: usize,

    /// Give up after this many proposals per requested replicate.
    #[arg(long, default_value_t = 1000)]
    pub proposal_cap: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub common: Common,

    #[arg(long, value_enum, default_value = "regress")]
    pub algorithm: AlgorithmArg,

    /// Coverage to solve for on the estimated curve (curve algorithm).
    #[arg(long)]
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub id: FigureId,

    #[command(flatten)]
    pub common: Common,

    /// Tempering powers (fig1-topleft).
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1")]
    pub vs: Vec<f64>,

    /// Window radii (fig1-bottom).
    #[arg(long, value_delimiter = ',', default_value = "1,0.3")]
    pub rhos: Vec<f64>,

    /// Points on the observed-data grid over [-3, 3].
    #[arg(long, default_value_t = 25)]
    pub points: usize,

    /// Replicates per empirical-coverage bin (fig3-left).
    #[arg(long, default_value_t = 50)]
    pub bin: usize,

    /// Coupling used to simulate the observed lattice when none is given (fig3-right).
    #[arg(long, default_value_t = 0.8)]
    pub phi: f64,

    #[arg(long, default_value_t = 0.95)]
    pub target: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,

    /// Radii, largest first.
    #[arg(long, value_delimiter = ',', default_value = "inf,1,0.6,0.3")]
    pub rho_grid: Vec<f64>,
}

/// Position and value of `--config` in `args`.
fn find_config(args: &[OsString]) -> Option<(usize, usize, PathBuf)> {
    for (k, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return args.get(k + 1).map(|p| (k, 2, PathBuf::from(p)));
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some((k, 1, PathBuf::from(p)));
        }
    }
    None
}

/// Splice config-file entries in as flags placed right after the subcommand,
/// so that any flag given on the command line overrides them.
pub fn expand_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some((at, width, path)) = find_config(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let kv = KeyValues::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
    let mut injected = Vec::new();
    for (key, value) in kv.0 {
        if key == "config" || key.starts_with('-') {
            bail!("config key `{key}` is not allowed");
        }
        injected.push(OsString::from(format!("--{}={value}", key.replace('_', "-"))));
    }
    // Keep the path visible to the parsed arguments for the manifest.
    let keep = OsString::from(format!("--config={}", path.display()));
    args.splice(at..at + width, [keep]);
    let sub = args
        .iter()
        .position(|a| matches!(a.to_str(), Some("calibrate" | "figure" | "sweep")))
        .context("config file given without a subcommand")?;
    let tail = args.split_off(sub + 1);
    args.extend(injected);
    args.extend(tail);
    Ok(args)
}
