use std::fmt::Write as _;

use covcal::engine::weighted_estimate;
use covcal::io::{fmt_f64, KeyValues};
use covcal::models::{exact_coverage, TemperedNormal};
use covcal::regression::fit;
use covcal::rng::auxiliary_rng;
use covcal::{coverage_curve, invert_nominal_level, run_proposal_bank, run_regression_bank, Model, RegressionFit};

use crate::args::{FigureArgs, FigureId};
use crate::run::{config_err, Failure, OutDir, Outcome};

pub fn figure(args: &FigureArgs, out: &mut OutDir) -> Outcome<()> {
    match args.id {
        FigureId::Fig1TopLeft => fig1_top_left(args, out),
        FigureId::Fig1Bottom => fig1_bottom(args, out),
        FigureId::Fig3Left => fig3_left(args, out),
        FigureId::Fig3Right => fig3_right(args, out),
    }
}

fn y_grid(points: usize) -> Outcome<Vec<f64>> {
    if points < 2 {
        return Err(config_err("--points must be at least 2"));
    }
    Ok((0..points)
        .map(|k| -3.0 + 6.0 * k as f64 / (points - 1) as f64)
        .collect())
}

fn fit_bank(covered: &[bool], summaries: &[Vec<f64>], basis_dim: usize) -> Outcome<RegressionFit> {
    fit(covered, summaries, basis_dim).map_err(|e| Failure::Estimator(e.into()))
}

/// Regression estimate of b(y) against the closed form, per tempering power.
fn fig1_top_left(args: &FigureArgs, out: &mut OutDir) -> Outcome<()> {
    let cfg = args.common.calibration_config()?;
    let ys = y_grid(args.points)?;
    let mut csv = String::from("v,y,b_true,c_hat,se\n");
    for &v in &args.vs {
        let model = TemperedNormal::new(v).map_err(config_err)?;
        let bank = run_regression_bank(&model, &cfg)?;
        let fitted = fit_bank(&bank.covered(), &bank.summaries(), args.common.basis_dim)?;
        for &y in &ys {
            let p = fitted.predict(&[y]);
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                fmt_f64(v),
                fmt_f64(y),
                fmt_f64(exact_coverage(y, cfg.alpha, v)),
                fmt_f64(p.probability),
                fmt_f64(p.std_error)
            );
        }
    }
    out.write("fig1-topleft.csv", csv.as_bytes())
}

/// Importance-sampling estimates of b(y) at several window radii.
fn fig1_bottom(args: &FigureArgs, out: &mut OutDir) -> Outcome<()> {
    let base = args.common.calibration_config()?;
    let dist = args.common.distance();
    let ys = y_grid(args.points)?;
    let mut csv = String::from("v,alpha,rho,y,b_true,c_hat,sigma_hat,ess,m_used\n");
    for &v in &args.vs {
        let model = TemperedNormal::new(v).map_err(config_err)?;
        for &rho in &args.rhos {
            let cfg = covcal::CalibrationConfig { rho, ..base.clone() };
            cfg.validate()?;
            for &y in &ys {
                let bank = run_proposal_bank(&model, &y, &cfg, dist)?;
                if bank.timed_out {
                    return Err(covcal::CalibrationError::WindowTimeout {
                        accepted: bank.len(),
                        wanted: bank.target,
                        proposals: bank.proposals,
                    }
                    .into());
                }
                let e = weighted_estimate(&bank.covered(), &bank.weights())?;
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    fmt_f64(v),
                    fmt_f64(cfg.alpha),
                    fmt_f64(rho),
                    fmt_f64(y),
                    fmt_f64(exact_coverage(y, cfg.alpha, v)),
                    fmt_f64(e.c_hat),
                    fmt_f64(e.sigma_hat),
                    fmt_f64(e.ess),
                    e.m_used
                );
            }
        }
    }
    out.write("fig1-bottom.csv", csv.as_bytes())
}

/// Binned empirical coverage of consecutive replicates ordered by a scalar
/// summary: (mean summary, coverage, count).
pub fn binned_coverage(summary: &[f64], covered: &[bool], per_bin: usize) -> Vec<(f64, f64, usize)> {
    let mut order: Vec<usize> = (0..summary.len()).collect();
    order.sort_by(|&a, &b| summary[a].total_cmp(&summary[b]).then(a.cmp(&b)));
    order
        .chunks(per_bin.max(1))
        .map(|chunk| {
            let n = chunk.len() as f64;
            let s = chunk.iter().map(|&i| summary[i]).sum::<f64>() / n;
            let c = chunk.iter().filter(|&&i| covered[i]).count() as f64 / n;
            (s, c, chunk.len())
        })
        .collect()
}

/// Ising regression fit over the sufficient statistic with binned coverage.
fn fig3_left(args: &FigureArgs, out: &mut OutDir) -> Outcome<()> {
    let cfg = args.common.calibration_config()?;
    let observed = args.common.observed_lattice()?;
    let model = args.common.ising_model(observed.as_ref())?;
    let bank = run_regression_bank(&model, &cfg)?;
    let covered = bank.covered();
    let summaries = bank.summaries();
    let fitted = fit_bank(&covered, &summaries, args.common.basis_dim)?;
    let s: Vec<f64> = summaries.iter().map(|v| v[0]).collect();
    let (lo, hi) = s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(*x), h.max(*x)));

    let mut fit_csv = String::from("s,c_hat,se\n");
    let mut x = lo.floor();
    while x <= hi {
        let p = fitted.predict(&[x]);
        let _ = writeln!(
            fit_csv,
            "{},{},{}",
            fmt_f64(x),
            fmt_f64(p.probability),
            fmt_f64(p.std_error)
        );
        x += 1.0;
    }
    let mut bins_csv = String::from("s_mean,coverage,count,c_fit\n");
    let mut max_gap = 0.0f64;
    for (sm, c, n) in binned_coverage(&s, &covered, args.bin) {
        let f = fitted.predict(&[sm]).probability;
        max_gap = max_gap.max((f - c).abs());
        let _ = writeln!(bins_csv, "{},{},{},{}", fmt_f64(sm), fmt_f64(c), n, fmt_f64(f));
    }
    out.write("fig3-left-fit.csv", fit_csv.as_bytes())?;
    out.write("fig3-left-bins.csv", bins_csv.as_bytes())?;
    out.write("fit.txt", fitted.to_text().as_bytes())?;
    let mut kv = KeyValues::default();
    kv.push_f64("max_gap", max_gap);
    kv.push("m_used", bank.len());
    kv.push("seed", cfg.master_seed);
    kv.push("algorithm", "regress");
    out.write("summary.txt", kv.to_text().as_bytes())
}

/// Ising coverage curve at the observed lattice, with the level that reaches
/// the target coverage.
fn fig3_right(args: &FigureArgs, out: &mut OutDir) -> Outcome<()> {
    let cfg = args.common.calibration_config()?;
    let observed = args.common.observed_lattice()?;
    let model = args.common.ising_model(observed.as_ref())?;
    let y = match observed {
        Some(y) => y,
        None => {
            let mut rng = auxiliary_rng(cfg.master_seed, 1);
            model
                .simulate(args.phi, &mut rng)
                .map_err(|e| Failure::Estimator(e.into()))?
        }
    };
    out.write("observed.txt", y.to_text().as_bytes())?;
    let (curve, bank) = coverage_curve(&model, &y, &cfg, args.common.distance())?;
    let mut csv = String::from("alpha,c_hat,sigma_hat\n");
    for k in 0..curve.len() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            fmt_f64(curve.alpha()[k]),
            fmt_f64(curve.c_hat()[k]),
            fmt_f64(curve.sigma_hat()[k])
        );
    }
    out.write("fig3-right.csv", csv.as_bytes())?;
    let mut kv = KeyValues::default();
    kv.push("statistic", model.summary(&y)[0]);
    kv.push_f64("target", args.target);
    match invert_nominal_level(&curve, args.target) {
        Ok(a) => kv.push_f64("alpha_adjusted", a),
        Err(e) => {
            eprintln!("warning: {e}");
            kv.push("alpha_adjusted", "unreachable");
        }
    }
    kv.push("m_used", bank.len());
    kv.push("proposals", bank.proposals);
    kv.push("seed", cfg.master_seed);
    kv.push("algorithm", "curve");
    out.write("summary.txt", kv.to_text().as_bytes())
}
