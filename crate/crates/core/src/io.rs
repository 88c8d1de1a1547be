//! Text formats: replicate banks, coverage curves and ρ-sweeps as CSV, run
//! summaries as `key = value` lines.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::diagnostics::SweepRow;
use crate::engine::{Algorithm, Bank, CoverageCurve, CoverageEstimate, Replicate};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn bank_header(summary_dim: usize) -> String {
    let mut h = String::from("i,phi,covered,weight,distance");
    for k in 1..=summary_dim {
        h.push_str(&format!(",s_{k}"));
    }
    h
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn write_bank_csv<D, W: Write>(bank: &Bank<D>, mut out: W) -> io::Result<()> {
    writeln!(out, "{}", bank_header(bank.summary_dim))?;
    for r in &bank.replicates {
        write!(
            out,
            "{},{},{},{},{}",
            r.index,
            fmt_f64(r.phi),
            u8::from(r.covered),
            opt(r.weight),
            opt(r.distance)
        )?;
        for s in &r.summary {
            write!(out, ",{}", fmt_f64(*s))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(field: &str, line: usize) -> Result<f64, FormatError> {
    field
        .parse()
        .map_err(|_| parse_err(line, format!("`{field}` is not a number")))
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>, FormatError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f64(field, line).map(Some)
    }
}

/// Read a bank written by [`write_bank_csv`]. Datasets and posterior draws
/// are not stored, so the replicates carry neither.
pub fn read_bank_csv<R: BufRead>(input: R, algorithm: Algorithm) -> Result<Bank<()>, FormatError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 5 || cols[..5] != ["i", "phi", "covered", "weight", "distance"] {
        return Err(parse_err(1, "unexpected bank header"));
    }
    let p = cols.len() - 5;
    let mut replicates = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let n = k + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != p + 5 {
            return Err(parse_err(n, format!("expected {} fields, got {}", p + 5, f.len())));
        }
        let covered = match f[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(n, format!("covered must be 0 or 1, got `{other}`"))),
        };
        replicates.push(Replicate {
            index: f[0].parse().map_err(|_| parse_err(n, "bad index"))?,
            phi: parse_f64(f[1], n)?,
            data: (),
            theta: Vec::new(),
            covered,
            pit: f64::NAN,
            weight: parse_opt(f[3], n)?,
            distance: parse_opt(f[4], n)?,
            summary: f[5..].iter().map(|s| parse_f64(s, n)).collect::<Result<_, _>>()?,
        });
    }
    Ok(Bank {
        algorithm,
        target: replicates.len(),
        proposals: replicates.len() as u64,
        replicates,
        timed_out: false,
        summary_dim: p,
    })
}

pub fn write_curve_csv<W: Write>(curve: &CoverageCurve, mut out: W) -> io::Result<()> {
    writeln!(out, "alpha,c_hat")?;
    for (a, c) in curve.alpha().iter().zip(curve.c_hat()) {
        writeln!(out, "{},{}", fmt_f64(*a), fmt_f64(*c))?;
    }
    Ok(())
}

pub fn read_curve_csv<R: BufRead>(input: R) -> Result<CoverageCurve, FormatError> {
    let mut alpha = Vec::new();
    let mut c_hat = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line.trim() != "alpha,c_hat" {
                return Err(parse_err(1, "unexpected curve header"));
            }
            continue;
        }
        if let Some((a, c)) = line.trim().split_once(',') {
            alpha.push(parse_f64(a, k + 1)?);
            c_hat.push(parse_f64(c, k + 1)?);
        }
    }
    CoverageCurve::from_points(alpha, c_hat).map_err(|e| parse_err(0, e.to_string()))
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "rho,m_used,ess,c_hat,sigma_hat")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.rho),
            r.m_used,
            fmt_f64(r.ess),
            fmt_f64(r.c_hat),
            fmt_f64(r.sigma_hat)
        )?;
    }
    Ok(())
}

/// Ordered `key = value` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues(pub Vec<(String, String)>);

impl KeyValues {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn push_f64(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    /// The fields every run summary carries.
    pub fn for_estimate(est: &CoverageEstimate, seed: u64, algorithm: &str) -> Self {
        let mut kv = Self::default();
        kv.push_f64("c_hat", est.c_hat);
        kv.push_f64("sigma_hat", est.sigma_hat);
        kv.push_f64("ess", est.ess);
        kv.push("m_used", est.m_used);
        kv.push("seed", seed);
        kv.push("algorithm", algorithm);
        kv
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Parse `key = value` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut out = Vec::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(k + 1, format!("expected `key = value`, got `{line}`")))?;
            out.push((key.trim().to_string(), value.trim().to_string()));
        }
        Ok(Self(out))
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.0.iter().cloned().collect()
    }
}
