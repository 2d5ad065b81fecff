use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for every distribution the engines hand out.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Law of the default count `C_t` on `{0, ..., M}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDistribution {
    pub t: f64,
    pub probs: Vec<f64>,
}

impl LossDistribution {
    /// Checked constructor: non-negative entries summing to one.
    pub fn new(t: f64, probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::validation("empty distribution"));
        }
        if let Some((k, p)) = probs.iter().enumerate().find(|(_, p)| !(**p >= 0.0)) {
            return Err(Error::Numerical(format!(
                "negative or non-finite probability {p} at count {k}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Numerical(format!(
                "probabilities sum to {total}, off by {:e}",
                total - 1.0
            )));
        }
        Ok(Self { t, probs })
    }

    pub fn point_mass(t: f64, pool_size: usize, count: usize) -> Self {
        let mut probs = vec![0.0; pool_size + 1];
        probs[count] = 1.0;
        Self { t, probs }
    }

    pub fn pool_size(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean_count(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// `P(C_t >= k)`.
    pub fn survival(&self, k: usize) -> f64 {
        self.probs.iter().skip(k).sum()
    }

    /// `E[f(C_t)]`.
    pub fn expectation(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * f(k)).sum()
    }

    pub fn total_variation(&self, other: &LossDistribution) -> f64 {
        let n = self.probs.len().max(other.probs.len());
        let get = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        0.5 * (0..n)
            .map(|i| (get(&self.probs, i) - get(&other.probs, i)).abs())
            .sum::<f64>()
    }

    /// Writes `count,probability` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["count", "probability"])?;
        for (k, p) in self.probs.iter().enumerate() {
            w.write_record([k.to_string(), format!("{p:e}")])?;
        }
        w.flush().map_err(|e| Error::io("<distribution csv>", e))?;
        Ok(())
    }
}
