use rayon::prelude::*;
use serde::Serialize;

use super::paths::apply_strategy;
use super::shocks::{path_rng, sample_shock_stream};
use crate::error::{Error, Result};
use crate::loss_engine::{IntensitySchedule, LossDistribution};
use crate::model::{PoolSpec, Strategy};

const CHUNK: u64 = 1024;

/// Monte Carlo histogram of the default count at one date.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalDistribution {
    pub t: f64,
    pub strategy: Strategy,
    pub n_paths: u64,
    pub seed: u64,
    /// Frequencies on `0..=M`.
    pub frequencies: Vec<f64>,
    /// Binomial standard error of each frequency.
    pub std_errors: Vec<f64>,
    /// When set, the last bucket holds every count `>= M` (repeated defaults only).
    pub last_bucket_is_overflow: bool,
}

impl EmpiricalDistribution {
    pub fn to_distribution(&self) -> Result<LossDistribution> {
        LossDistribution::new(self.t, self.frequencies.clone())
    }

    pub fn mean_count(&self) -> f64 {
        self.frequencies
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }
}

fn add_counts(mut a: Vec<Vec<u64>>, b: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
    for (ra, rb) in a.iter_mut().zip(b) {
        for (x, y) in ra.iter_mut().zip(rb) {
            *x += y;
        }
    }
    a
}

/// Simulated count histograms at each of `times`, sharing one set of paths.
///
/// Every path draws from its own ChaCha8 stream, so the result depends only on
/// `seed` and `n_paths`, never on thread scheduling.
pub fn empirical_distributions(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    strategy: Strategy,
    times: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<Vec<EmpiricalDistribution>> {
    pool.validate()?;
    schedule.validate(pool)?;
    if n_paths == 0 {
        return Err(Error::validation("need at least one path"));
    }
    if times.is_empty() || times.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::domain("simulation times must be positive"));
    }
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let m = pool.size;
    let chunks: Vec<(u64, u64)> = (0..n_paths)
        .step_by(CHUNK as usize)
        .map(|s| (s, (s + CHUNK).min(n_paths)))
        .collect();

    let counts = chunks
        .into_par_iter()
        .map(|(lo, hi)| -> Result<Vec<Vec<u64>>> {
            let mut hist = vec![vec![0u64; m + 1]; times.len()];
            for path in lo..hi {
                let mut rng = path_rng(seed, path);
                let events = sample_shock_stream(pool, schedule, horizon, &mut rng)?;
                let tr = apply_strategy(pool, &events, strategy)?;
                for (h, &t) in hist.iter_mut().zip(times) {
                    h[tr.count_at(t).min(m)] += 1;
                }
            }
            Ok(hist)
        })
        .try_reduce(|| vec![vec![0u64; m + 1]; times.len()], |a, b| Ok(add_counts(a, b)))?;

    let n = n_paths as f64;
    Ok(times
        .iter()
        .zip(counts)
        .map(|(&t, h)| {
            let frequencies: Vec<f64> = h.iter().map(|&c| c as f64 / n).collect();
            let std_errors = frequencies
                .iter()
                .map(|&p| (p * (1.0 - p) / n).sqrt())
                .collect();
            EmpiricalDistribution {
                t,
                strategy,
                n_paths,
                seed,
                frequencies,
                std_errors,
                last_bucket_is_overflow: strategy == Strategy::Repeated,
            }
        })
        .collect())
}

pub fn empirical_distribution(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    strategy: Strategy,
    t: f64,
    n_paths: u64,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let mut v = empirical_distributions(pool, schedule, strategy, &[t], n_paths, seed)?;
    Ok(v.remove(0))
}
