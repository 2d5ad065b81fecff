use nalgebra::DMatrix;

use super::binomial::LogBinomial;
use super::schedule::IntensitySchedule;
use crate::error::{Error, Result};
use crate::model::{ModelKind, PoolSpec};

/// Dense generator of the counting chain, indexed `(to, from)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(pub DMatrix<f64>);

impl RateMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, to: usize, from: usize) -> f64 {
        self.0[(to, from)]
    }

    /// Largest absolute column sum.
    pub fn max_column_sum_error(&self) -> f64 {
        self.0
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Pure-birth generator stored by jump size: from state `y` the chain jumps to
/// `y + amplitudes[j]` with rate `rates[j][y]`.
#[derive(Debug, Clone)]
pub struct JumpGenerator {
    pub size: usize,
    pub amplitudes: Vec<usize>,
    pub rates: Vec<Vec<f64>>,
    pub exit: Vec<f64>,
}

impl JumpGenerator {
    /// Integrated GPCL generator over `[t0, t1]`: size-`a` jump rate from `y`
    /// is `C(M - y, a) * (Lambda~_a(t1) - Lambda~_a(t0))`.
    pub fn gpcl_cumulated(
        pool: &PoolSpec,
        schedule: &IntensitySchedule,
        t0: f64,
        t1: f64,
    ) -> Result<Self> {
        if schedule.model != ModelKind::Gpcl {
            return Err(Error::validation("generator needs a GPCL schedule"));
        }
        if !(t0 >= 0.0 && t1 > t0) {
            return Err(Error::domain(format!(
                "generator needs 0 <= t0 < t1, got [{t0}, {t1}]"
            )));
        }
        schedule.validate(pool)?;
        let deltas: Vec<f64> = (0..schedule.amplitudes.len())
            .map(|j| (schedule.value(j, t1) - schedule.value(j, t0)).max(0.0))
            .collect();
        Ok(Self::gpcl_from_table_increments(
            pool.size,
            &schedule.amplitudes,
            &deltas,
            &LogBinomial::new(pool.size),
        ))
    }

    /// Same as [`gpcl_cumulated`](Self::gpcl_cumulated) from raw table-convention increments.
    pub fn gpcl_from_table_increments(
        size: usize,
        amplitudes: &[usize],
        deltas: &[f64],
        binom: &LogBinomial,
    ) -> Self {
        let fractions = surviving_fractions(size, amplitudes, binom);
        Self::from_fractions(size, amplitudes, deltas, &fractions)
    }

    /// Same as [`Self::gpcl_from_table_increments`] with the binomial ratios
    /// `C(M-y, alpha)/C(M, alpha)` precomputed by [`surviving_fractions`].
    pub fn from_fractions(
        size: usize,
        amplitudes: &[usize],
        deltas: &[f64],
        fractions: &[Vec<f64>],
    ) -> Self {
        let mut exit = vec![0.0; size + 1];
        let mut rates = Vec::with_capacity(amplitudes.len());
        for ((&a, &delta), frac) in amplitudes.iter().zip(deltas).zip(fractions) {
            let mut row = vec![0.0; size + 1];
            if delta > 0.0 && a <= size {
                for y in 0..=size - a {
                    let r = delta * frac[y];
                    row[y] = r;
                    exit[y] += r;
                }
            }
            rates.push(row);
        }
        Self {
            size,
            amplitudes: amplitudes.to_vec(),
            rates,
            exit,
        }
    }

    pub fn max_exit(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.exit.iter().all(|&e| e == 0.0)
    }

    /// `out = G v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for y in 0..=self.size {
            out[y] = -self.exit[y] * v[y];
        }
        for (a, row) in self.amplitudes.iter().zip(&self.rates) {
            for y in 0..=self.size.saturating_sub(*a) {
                out[y + a] += row[y] * v[y];
            }
        }
    }

    pub fn to_dense(&self) -> RateMatrix {
        let n = self.size + 1;
        let mut m = DMatrix::zeros(n, n);
        for (a, row) in self.amplitudes.iter().zip(&self.rates) {
            for y in 0..n.saturating_sub(*a) {
                m[(y + a, y)] += row[y];
            }
        }
        for y in 0..n {
            m[(y, y)] = -self.exit[y];
        }
        RateMatrix(m)
    }

    /// `exp(G) v` by uniformization. Every term is non-negative, so there is
    /// no cancellation; the Poisson tail beyond the last term is below 1e-16.
    pub fn exp_apply(&self, v: &[f64]) -> Vec<f64> {
        const MAX_RATE_PER_PASS: f64 = 32.0;
        let q_total = self.max_exit();
        if q_total == 0.0 {
            return v.to_vec();
        }
        let passes = (q_total / MAX_RATE_PER_PASS).ceil().max(1.0) as usize;
        let q = q_total / passes as f64;
        let scale = 1.0 / (q * passes as f64);
        let n = self.size + 1;
        let mut current = v.to_vec();
        let mut term = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for _ in 0..passes {
            // P = I + G / (q * passes) applied per pass
            term.copy_from_slice(&current);
            let mut weight = (-q).exp();
            let mut covered = weight;
            for (a, t) in acc.iter_mut().zip(&term) {
                *a = weight * t;
            }
            let max_terms = (q + 12.0 * q.sqrt() + 40.0) as usize;
            for k in 1..=max_terms {
                self.apply(&term, &mut next);
                for (nx, t) in next.iter_mut().zip(&term) {
                    *nx = t + *nx * scale;
                }
                std::mem::swap(&mut term, &mut next);
                weight *= q / k as f64;
                covered += weight;
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += weight * t;
                }
                if k as f64 > q && (1.0 - covered < 1e-16 || weight < 1e-18) {
                    break;
                }
            }
            current.copy_from_slice(&acc);
        }
        current
    }
}

/// Integrated GPCL generator over `[t0, t1]` as a dense matrix.
/// `C(M-y, alpha)/C(M, alpha)` for every amplitude and state `y`.
pub fn surviving_fractions(size: usize, amplitudes: &[usize], binom: &LogBinomial) -> Vec<Vec<f64>> {
    amplitudes
        .iter()
        .map(|&a| {
            (0..=size)
                .map(|y| {
                    if a <= size && y + a <= size {
                        binom.surviving_fraction(size, y, a)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn build_cumulated_generator(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    t0: f64,
    t1: f64,
) -> Result<RateMatrix> {
    Ok(JumpGenerator::gpcl_cumulated(pool, schedule, t0, t1)?.to_dense())
}
