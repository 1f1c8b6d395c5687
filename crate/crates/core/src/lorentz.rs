//! The Lorentz `(p,1)` sequence norm `Σ_n n^{1/p − 1} |x|*_n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finitely supported real sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FiniteSequence(pub Vec<f64>);

impl FiniteSequence {
    /// `|x|` sorted in nonincreasing order.
    pub fn decreasing_rearrangement(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.0.iter().map(|v| v.abs()).collect();
        r.sort_by(|a, b| b.total_cmp(a));
        r
    }
}

impl From<Vec<f64>> for FiniteSequence {
    fn from(v: Vec<f64>) -> Self {
        FiniteSequence(v)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "p",
            format!("must be finite and > 1, got {p}"),
        ))
    }
}

fn weight(n: usize, p: f64) -> f64 {
    (n as f64).powf(1.0 / p - 1.0)
}

pub fn lorentz_p1_norm(x: &FiniteSequence, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(x.decreasing_rearrangement()
        .into_iter()
        .take_while(|&v| v > 0.0)
        .enumerate()
        .map(|(i, v)| weight(i + 1, p) * v)
        .sum())
}

/// Norms of the all-ones vectors of length `1..=k_max`.
pub fn lorentz_norm_table(k_max: usize, p: f64) -> Result<Vec<f64>> {
    check_p(p)?;
    if k_max == 0 {
        return Err(Error::param("k_max", "must be at least 1"));
    }
    let mut acc = 0.0;
    Ok((1..=k_max)
        .map(|k| {
            acc += weight(k, p);
            acc
        })
        .collect())
}

/// `k,norm` with a header row.
pub fn table_csv(table: &[f64]) -> String {
    let mut out = String::from("k,norm\n");
    for (i, v) in table.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, v));
    }
    out
}
