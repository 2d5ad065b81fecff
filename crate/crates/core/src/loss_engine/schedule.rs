use std::io::Read;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::binomial::LogBinomial;
use crate::error::{Error, Result};
use crate::model::{ModelKind, PoolSpec};

/// Cumulated mode intensities, piecewise linear in time between knots.
///
/// Values follow the usual tabulation ("table convention"): for GPL they are the Poisson
/// means `Lambda0_j(T_k)` of each mode; for GPCL they are `C(M, alpha_j) * Lambda~_j(T_k)`,
/// the cumulated rate of the size-`alpha_j` aggregate at time 0. In both cases a
/// row is the cumulated rate of shocks of that size in the repeated-default world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySchedule {
    pub model: ModelKind,
    pub amplitudes: Vec<usize>,
    #[serde(rename = "knots_years")]
    pub knots: Vec<f64>,
    /// `cumulated[j][k]` is the value for amplitude `j` at knot `k`.
    pub cumulated: Vec<Vec<f64>>,
}

impl IntensitySchedule {
    pub fn new(
        model: ModelKind,
        amplitudes: Vec<usize>,
        knots: Vec<f64>,
        cumulated: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let s = Self {
            model,
            amplitudes,
            knots,
            cumulated,
        };
        s.check_shape()?;
        Ok(s)
    }

    /// All-zero schedule.
    pub fn zero(model: ModelKind, amplitudes: Vec<usize>, knots: Vec<f64>) -> Result<Self> {
        let cumulated = vec![vec![0.0; knots.len()]; amplitudes.len()];
        Self::new(model, amplitudes, knots, cumulated)
    }

    /// Builds a schedule from non-negative per-interval increments `increments[j][k]`.
    pub fn from_increments(
        model: ModelKind,
        amplitudes: Vec<usize>,
        knots: Vec<f64>,
        increments: &[Vec<f64>],
    ) -> Result<Self> {
        let cumulated = increments
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0, |acc, &d| {
                        *acc += d;
                        Some(*acc)
                    })
                    .collect()
            })
            .collect();
        Self::new(model, amplitudes, knots, cumulated)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let schedule: Self = serde_json::from_str(s)?;
        schedule.check_shape()?;
        Ok(schedule)
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let schedule: Self = serde_json::from_reader(r)?;
        schedule.check_shape()?;
        Ok(schedule)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the compact JSON form; used to tag run outputs.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schedule always serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_shape(&self) -> Result<()> {
        if self.knots.is_empty() {
            return Err(Error::validation("schedule needs at least one knot"));
        }
        if !(self.knots[0] > 0.0) || self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::validation(
                "knots must be positive and strictly increasing",
            ));
        }
        if self.cumulated.len() != self.amplitudes.len() {
            return Err(Error::validation(format!(
                "{} amplitudes but {} cumulated rows",
                self.amplitudes.len(),
                self.cumulated.len()
            )));
        }
        if self.amplitudes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "amplitudes must be distinct and increasing",
            ));
        }
        if self.amplitudes.first() == Some(&0) {
            return Err(Error::validation("amplitudes start at 1"));
        }
        for (a, row) in self.amplitudes.iter().zip(&self.cumulated) {
            if row.len() != self.knots.len() {
                return Err(Error::validation(format!(
                    "amplitude {a}: {} values for {} knots",
                    row.len(),
                    self.knots.len()
                )));
            }
            let mut prev = 0.0;
            for &v in row {
                if !v.is_finite() || v < prev {
                    return Err(Error::validation(format!(
                        "amplitude {a}: cumulated values must be finite, non-negative and non-decreasing"
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }

    /// Full validation against a pool.
    pub fn validate(&self, pool: &PoolSpec) -> Result<()> {
        self.check_shape()?;
        if let Some(&a) = self.amplitudes.iter().find(|&&a| a > pool.size) {
            return Err(Error::validation(format!(
                "amplitude {a} exceeds pool size {}",
                pool.size
            )));
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        *self.knots.last().expect("knots never empty")
    }

    pub fn position(&self, amplitude: usize) -> Option<usize> {
        self.amplitudes.iter().position(|&a| a == amplitude)
    }

    /// Table-convention value of mode `j` (row index) at time `t`.
    ///
    /// Zero at `t = 0`, linear between knots, and extended past the last knot with
    /// the slope of the final interval.
    pub fn value(&self, j: usize, t: f64) -> f64 {
        let row = &self.cumulated[j];
        let knots = &self.knots;
        if t <= 0.0 {
            return 0.0;
        }
        let k = knots.partition_point(|&x| x < t);
        if k == 0 {
            return row[0] * t / knots[0];
        }
        let last = knots.len() - 1;
        let (i0, i1) = if k > last { (last.saturating_sub(1), last) } else { (k - 1, k) };
        let (t0, v0) = if last == 0 { (0.0, 0.0) } else { (knots[i0], row[i0]) };
        let (t1, v1) = (knots[i1], row[i1]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Values of every mode at `t`.
    pub fn values(&self, t: f64) -> Vec<f64> {
        (0..self.amplitudes.len()).map(|j| self.value(j, t)).collect()
    }

    /// Per-interval increments `increments[j][k]`.
    pub fn increments(&self) -> Vec<Vec<f64>> {
        self.cumulated
            .iter()
            .map(|row| {
                let mut prev = 0.0;
                row.iter()
                    .map(|&v| {
                        let d = v - prev;
                        prev = v;
                        d
                    })
                    .collect()
            })
            .collect()
    }

    /// Splits `[from, to]` at knots, so intensities are constant on every piece.
    pub fn segments(&self, from: f64, to: f64) -> Vec<(f64, f64)> {
        let mut cuts = vec![from];
        cuts.extend(self.knots.iter().copied().filter(|&k| k > from && k < to));
        cuts.push(to);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1]))
            .collect()
    }

    /// Cumulated cluster intensity `Lambda~` of a single cluster of size `amplitude`
    /// at `t`: the table value divided by `C(M, amplitude)`.
    pub fn cluster_lambda(&self, pool: &PoolSpec, amplitude: usize, t: f64) -> Result<f64> {
        if self.model != ModelKind::Gpcl {
            return Err(Error::validation(
                "cluster intensities are defined for GPCL schedules",
            ));
        }
        if t < 0.0 {
            return Err(Error::domain(format!("negative time {t}")));
        }
        let j = self
            .position(amplitude)
            .ok_or_else(|| Error::validation(format!("unknown amplitude {amplitude}")))?;
        if amplitude > pool.size {
            return Err(Error::validation(format!(
                "amplitude {amplitude} exceeds pool size {}",
                pool.size
            )));
        }
        let v = self.value(j, t);
        if v == 0.0 {
            return Ok(0.0);
        }
        let binom = LogBinomial::new(pool.size);
        Ok((v.ln() - binom.ln_choose(pool.size, amplitude)).exp())
    }

    /// Drops modes whose final value is below `threshold`.
    pub fn without_negligible(&self, threshold: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.amplitudes.len())
            .filter(|&j| self.cumulated[j].last().copied().unwrap_or(0.0) >= threshold)
            .collect();
        Self::new(
            self.model,
            keep.iter().map(|&j| self.amplitudes[j]).collect(),
            self.knots.clone(),
            keep.iter().map(|&j| self.cumulated[j].clone()).collect(),
        )
    }
}
