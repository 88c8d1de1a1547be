use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::ValueEnum;
use covcal::diagnostics::rho_sweep;
use covcal::engine::{curve_from_bank, weighted_estimate};
use covcal::io::{fmt_f64, write_bank_csv, write_curve_csv, write_sweep_csv, KeyValues};
use covcal::models::{Boundary, IsingLattice, IsingModel, TemperedNormal};
use covcal::regression::fit;
use covcal::{
    estimate_coverage_at, invert_nominal_level, run_oracle, run_proposal_bank, run_regression_bank, Bank,
    CalibrationConfig, CalibrationError, DistanceKind, Model, SetKind, SetSource,
};

use crate::args::{AlgorithmArg, CalibrateArgs, Common, DistanceArg, ModelKind, SetKindArg, SetSourceArg, SweepArgs};

pub fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

/// A failed run, tagged with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Estimator(anyhow::Error),
    Output(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Estimator(_) => 3,
            Failure::Output(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Estimator(e) => write!(f, "estimator error: {e:#}"),
            Failure::Output(e) => write!(f, "output error: {e:#}"),
        }
    }
}

impl From<CalibrationError> for Failure {
    fn from(e: CalibrationError) -> Self {
        match e {
            CalibrationError::Config(_) => Failure::Config(e.into()),
            other => Failure::Estimator(other.into()),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub fn config_err(msg: impl fmt::Display) -> Failure {
    Failure::Config(anyhow!("{msg}"))
}

/// Output directory that remembers what was written to it.
pub struct OutDir {
    path: PathBuf,
    files: Vec<String>,
}

impl OutDir {
    pub fn create(path: &Path) -> Outcome<Self> {
        fs::create_dir_all(path)
            .with_context(|| format!("creating {}", path.display()))
            .map_err(Failure::Output)?;
        Ok(Self {
            path: path.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Outcome<()> {
        let p = self.path.join(name);
        fs::write(&p, bytes)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(Failure::Output)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Outcome<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Failure::Output(e.into()))?;
        self.write(name, &buf)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

impl Common {
    pub fn calibration_config(&self) -> Outcome<CalibrationConfig> {
        let cfg = CalibrationConfig {
            alpha: self.alpha,
            replicates: self.m,
            posterior_draws: self.j,
            rho: self.rho,
            master_seed: self.seed,
            set_kind: match self.set_kind {
                SetKindArg::Hpd => SetKind::Hpd,
                SetKindArg::EqualTail => SetKind::EqualTail,
                SetKindArg::LowerTail => SetKind::LowerTail,
            },
            set_source: match self.set_source {
                SetSourceArg::Exact => SetSource::Exact,
                SetSourceArg::Samples => SetSource::Samples,
            },
            workers: self.workers,
            curve_points: self.curve_points,
            proposal_cap_factor: self.proposal_cap,
        };
        cfg.validate()?;
        if self.basis_dim != 0 && self.basis_dim < 4 {
            return Err(config_err(format!(
                "--basis-dim must be 0 or at least 4, got {}",
                self.basis_dim
            )));
        }
        Ok(cfg)
    }

    pub fn distance(&self) -> DistanceKind {
        match (self.distance, self.set_source) {
            (DistanceArg::Summary, _) => DistanceKind::Summary,
            (DistanceArg::Ks, SetSourceArg::Exact) => DistanceKind::KsGrid,
            (DistanceArg::Ks, SetSourceArg::Samples) => DistanceKind::KsSamples,
        }
    }

    pub fn normal_model(&self) -> Outcome<TemperedNormal> {
        TemperedNormal::new(self.v).map_err(config_err)
    }

    pub fn observed_lattice(&self) -> Outcome<Option<IsingLattice>> {
        let Some(path) = &self.ising_data else {
            return Ok(None);
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading lattice {}", path.display()))
            .map_err(Failure::Config)?;
        IsingLattice::from_text(&text, Boundary::Free)
            .map(Some)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    /// Model sized to the observed lattice when one is given.
    pub fn ising_model(&self, observed: Option<&IsingLattice>) -> Outcome<IsingModel> {
        let n = observed.map_or(self.ising_n, IsingLattice::n);
        IsingModel::with_settings(n, self.sweeps, covcal::models::ising::DEFAULT_GRID_POINTS).map_err(config_err)
    }

    /// Every resolved setting, for the manifest.
    pub fn settings(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        if let Some(c) = &self.config {
            kv.push("config", c.display());
        }
        kv.push("model", value_name(&self.model));
        kv.push("v", fmt_f64(self.v));
        kv.push("ising_n", self.ising_n);
        if let Some(p) = &self.ising_data {
            kv.push("ising_data", p.display());
        }
        kv.push("sweeps", self.sweeps);
        if let Some(y) = self.y {
            kv.push("y", fmt_f64(y));
        }
        kv.push("alpha", fmt_f64(self.alpha));
        kv.push("m", self.m);
        kv.push("j", self.j);
        kv.push("rho", fmt_f64(self.rho));
        kv.push("distance", value_name(&self.distance));
        kv.push("set_kind", value_name(&self.set_kind));
        kv.push("set_source", value_name(&self.set_source));
        kv.push("seed", self.seed);
        kv.push("out", self.out.display());
        kv.push("workers", self.workers);
        kv.push("basis_dim", self.basis_dim);
        kv.push("curve_points", self.curve_points);
        kv.push("proposal_cap", self.proposal_cap);
        kv
    }
}

fn write_bank<D>(out: &mut OutDir, bank: &Bank<D>) -> Outcome<()> {
    out.write_with("bank.csv", |w| write_bank_csv(bank, w))
}

fn write_summary(out: &mut OutDir, kv: &KeyValues) -> Outcome<()> {
    out.write("summary.txt", kv.to_text().as_bytes())
}

fn require<'a, T>(observed: Option<&'a T>, what: &str) -> Outcome<&'a T> {
    observed.ok_or_else(|| config_err(format!("{what} needs observed data (--y or --ising-data)")))
}

pub fn calibrate(args: &CalibrateArgs, out: &mut OutDir) -> Outcome<()> {
    let common = &args.common;
    let cfg = common.calibration_config()?;
    match common.model {
        ModelKind::TemperedNormal => {
            let model = common.normal_model()?;
            calibrate_with(&model, common.y.as_ref(), args, &cfg, out)
        }
        ModelKind::Ising => {
            let observed = common.observed_lattice()?;
            let model = common.ising_model(observed.as_ref())?;
            calibrate_with(&model, observed.as_ref(), args, &cfg, out)
        }
    }
}

fn calibrate_with<M: Model>(
    model: &M,
    observed: Option<&M::Data>,
    args: &CalibrateArgs,
    cfg: &CalibrationConfig,
    out: &mut OutDir,
) -> Outcome<()> {
    let common = &args.common;
    let algorithm = value_name(&args.algorithm);
    match args.algorithm {
        AlgorithmArg::Oracle => {
            let y = require(observed, "the oracle")?;
            let (est, bank) = run_oracle(model, y, cfg)?;
            write_bank(out, &bank)?;
            write_summary(out, &KeyValues::for_estimate(&est, cfg.master_seed, &algorithm))
        }
        AlgorithmArg::Regress => {
            let bank = run_regression_bank(model, cfg)?;
            write_bank(out, &bank)?;
            let fitted =
                fit(&bank.covered(), &bank.summaries(), common.basis_dim).map_err(|e| Failure::Estimator(e.into()))?;
            out.write("fit.txt", fitted.to_text().as_bytes())?;
            let mut kv = match observed {
                Some(y) => {
                    let est = estimate_coverage_at(&bank, &fitted, &model.summary(y));
                    let mut kv = KeyValues::for_estimate(&est, cfg.master_seed, &algorithm);
                    kv.push("extrapolated", est.extrapolated);
                    if est.extrapolated {
                        eprintln!("warning: observed summary lies outside the training box");
                    }
                    kv
                }
                None => {
                    let mut kv = KeyValues::default();
                    kv.push("m_used", bank.len());
                    kv.push("seed", cfg.master_seed);
                    kv.push("algorithm", &algorithm);
                    kv
                }
            };
            kv.push_f64("lambda", fitted.lambda());
            write_summary(out, &kv)
        }
        AlgorithmArg::Is | AlgorithmArg::Curve => {
            let y = require(observed, "the importance sampler")?;
            let bank = run_proposal_bank(model, y, cfg, common.distance())?;
            write_bank(out, &bank)?;
            if bank.timed_out {
                return Err(CalibrationError::WindowTimeout {
                    accepted: bank.len(),
                    wanted: bank.target,
                    proposals: bank.proposals,
                }
                .into());
            }
            let mut kv;
            if args.algorithm == AlgorithmArg::Is {
                let est = weighted_estimate(&bank.covered(), &bank.weights())?;
                kv = KeyValues::for_estimate(&est, cfg.master_seed, &algorithm);
                kv.push_f64("clt_variance", est.clt_variance.unwrap_or(f64::NAN));
            } else {
                let curve = curve_from_bank(&bank, cfg.set_source, cfg.curve_points)?;
                out.write_with("curve.csv", |w| write_curve_csv(&curve, w))?;
                let k = curve
                    .alpha()
                    .partition_point(|a| *a < cfg.alpha - 1e-12)
                    .min(curve.len() - 1);
                let ess = covcal::ess(&bank.weights()).map_err(|e| Failure::Estimator(e.into()))?;
                kv = KeyValues::default();
                kv.push_f64("c_hat", curve.c_hat()[k]);
                kv.push_f64("sigma_hat", curve.sigma_hat()[k]);
                kv.push_f64("ess", ess);
                kv.push("m_used", bank.len());
                kv.push("seed", cfg.master_seed);
                kv.push("algorithm", &algorithm);
                if let Some(t) = args.target {
                    let adjusted = invert_nominal_level(&curve, t)?;
                    kv.push_f64("target", t);
                    kv.push_f64("alpha_adjusted", adjusted);
                }
            }
            kv.push("proposals", bank.proposals);
            write_summary(out, &kv)
        }
    }
}

pub fn sweep(args: &SweepArgs, out: &mut OutDir) -> Outcome<()> {
    let common = &args.common;
    if args.rho_grid.windows(2).any(|w| !(w[0] >= w[1])) || args.rho_grid.iter().any(|r| r.is_nan() || *r < 0.0) {
        return Err(config_err("--rho-grid must be nonnegative and descending"));
    }
    let mut cfg = common.calibration_config()?;
    cfg.rho = f64::INFINITY;
    match common.model {
        ModelKind::TemperedNormal => {
            let model = common.normal_model()?;
            sweep_with(&model, common.y.as_ref(), common, &cfg, &args.rho_grid, out)
        }
        ModelKind::Ising => {
            let observed = common.observed_lattice()?;
            let model = common.ising_model(observed.as_ref())?;
            sweep_with(&model, observed.as_ref(), common, &cfg, &args.rho_grid, out)
        }
    }
}

fn sweep_with<M: Model>(
    model: &M,
    observed: Option<&M::Data>,
    common: &Common,
    cfg: &CalibrationConfig,
    grid: &[f64],
    out: &mut OutDir,
) -> Outcome<()> {
    let y = require(observed, "the sweep")?;
    let bank = run_proposal_bank(model, y, cfg, common.distance())?;
    write_bank(out, &bank)?;
    let rows = rho_sweep(&bank, grid);
    out.write_with("sweep.csv", |w| write_sweep_csv(&rows, w))?;
    for r in rows.iter().filter(|r| r.is_empty()) {
        eprintln!("warning: no replicates within rho = {}", r.rho);
    }
    let mut kv = KeyValues::default();
    kv.push("m_used", bank.len());
    kv.push("seed", cfg.master_seed);
    kv.push("algorithm", "sweep");
    write_summary(out, &kv)
}
