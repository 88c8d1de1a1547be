//! Plain-text `key = value` serialisation of a fitted regression, so a fit
//! can score new observed datasets without re-running the simulations.

use std::collections::HashMap;
use std::fmt::Write;

use super::basis::SplineBasis;
use super::fit::{RegressionFit, Terms};
use super::RegressionError;

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
}

fn parse_list(s: &str) -> Result<Vec<f64>, RegressionError> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| RegressionError::Parse(format!("`{t}`: {e}")))
        })
        .collect()
}

impl RegressionFit {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "basis_dim = {}", self.basis_dim).unwrap();
        writeln!(out, "summary_dim = {}", self.summary_dim()).unwrap();
        writeln!(out, "n_obs = {}", self.n_obs).unwrap();
        writeln!(out, "lambda = {:.16e}", self.lambda).unwrap();
        writeln!(out, "lower = {}", join(&self.lower)).unwrap();
        writeln!(out, "upper = {}", join(&self.upper)).unwrap();
        if let Terms::Spline { bases } = &self.terms {
            for (k, b) in bases.iter().enumerate() {
                match b {
                    Some(b) => writeln!(out, "knots_{} = {}", k + 1, join(b.interior_knots())).unwrap(),
                    None => writeln!(out, "knots_{} = constant", k + 1).unwrap(),
                }
            }
        }
        writeln!(out, "coefficients = {}", join(&self.coefficients)).unwrap();
        writeln!(out, "covariance = {}", join(&self.covariance)).unwrap();
        out
    }

    pub fn from_text(text: &str) -> Result<Self, RegressionError> {
        let mut kv = HashMap::new();
        for line in text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
        {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| RegressionError::Parse(format!("expected `key = value`, got `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| RegressionError::Parse(format!("missing `{k}`")))
        };
        let int = |k: &str| -> Result<usize, RegressionError> {
            get(k)?.parse().map_err(|e| RegressionError::Parse(format!("{k}: {e}")))
        };
        let basis_dim = int("basis_dim")?;
        let dim = int("summary_dim")?;
        let n_obs = int("n_obs")?;
        let lambda = parse_list(get("lambda")?)?
            .first()
            .copied()
            .ok_or_else(|| RegressionError::Parse("empty lambda".into()))?;
        let lower = parse_list(get("lower")?)?;
        let upper = parse_list(get("upper")?)?;
        if lower.len() != dim || upper.len() != dim {
            return Err(RegressionError::Parse("bounding box dimension mismatch".into()));
        }
        let terms = if basis_dim == 0 {
            Terms::Linear { dim }
        } else {
            let bases = (0..dim)
                .map(|k| {
                    let raw = get(&format!("knots_{}", k + 1))?;
                    if raw == "constant" {
                        Ok(None)
                    } else {
                        Ok(Some(SplineBasis::from_parts(lower[k], upper[k], parse_list(raw)?)))
                    }
                })
                .collect::<Result<Vec<_>, RegressionError>>()?;
            Terms::Spline { bases }
        };
        let coefficients = parse_list(get("coefficients")?)?;
        let covariance = parse_list(get("covariance")?)?;
        let p = terms.n_columns();
        if coefficients.len() != p || covariance.len() != p * p {
            return Err(RegressionError::Parse(format!(
                "expected {p} coefficients and {} covariance entries",
                p * p
            )));
        }
        Ok(RegressionFit {
            basis_dim,
            terms,
            coefficients,
            lambda,
            covariance,
            lower,
            upper,
            n_obs,
        })
    }
}
