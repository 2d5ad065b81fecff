use nalgebra::DVector;

use super::binomial::LogBinomial;
use super::distribution::LossDistribution;
use super::expm::matrix_exponential;
use super::generator::{build_cumulated_generator, surviving_fractions, JumpGenerator};
use super::schedule::IntensitySchedule;
use crate::error::{Error, Result};
use crate::model::{ModelKind, PoolSpec};

fn check(pool: &PoolSpec, schedule: &IntensitySchedule, t: f64) -> Result<()> {
    if schedule.model != ModelKind::Gpcl {
        return Err(Error::validation("expected a GPCL schedule"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("bad time {t}")));
    }
    pool.validate()?;
    schedule.validate(pool)
}

/// Law of the GPCL default count at `t`: the ordered product of Padé
/// exponentials of the integrated generator over each knot interval,
/// applied to a point mass at zero defaults.
pub fn gpcl_distribution(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    t: f64,
) -> Result<LossDistribution> {
    check(pool, schedule, t)?;
    let mut state = DVector::<f64>::zeros(pool.size + 1);
    state[0] = 1.0;
    for (t0, t1) in schedule.segments(0.0, t) {
        let generator = build_cumulated_generator(pool, schedule, t0, t1)?;
        state = matrix_exponential(&generator)? * state;
    }
    LossDistribution::new(t, clean(state.iter().copied().collect()))
}

/// GPCL distributions at increasing `times`, stepping the chain forward by
/// uniformization of the sparse jump generator. Agrees with
/// [`gpcl_distribution`] to round-off and is much cheaper on dense time grids.
pub fn gpcl_term_structure(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    times: &[f64],
) -> Result<Vec<LossDistribution>> {
    if let Some(&last) = times.last() {
        check(pool, schedule, last)?;
    } else {
        return Ok(Vec::new());
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 {
        return Err(Error::domain("times must be non-negative and sorted"));
    }
    let binom = LogBinomial::new(pool.size);
    let fractions = surviving_fractions(pool.size, &schedule.amplitudes, &binom);
    let mut state = vec![0.0; pool.size + 1];
    state[0] = 1.0;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    let mut deltas = vec![0.0; schedule.amplitudes.len()];
    for &t in times {
        for (t0, t1) in schedule.segments(now, t) {
            for (j, d) in deltas.iter_mut().enumerate() {
                *d = (schedule.value(j, t1) - schedule.value(j, t0)).max(0.0);
            }
            let g = JumpGenerator::from_fractions(pool.size, &schedule.amplitudes, &deltas, &fractions);
            state = g.exp_apply(&state);
        }
        now = now.max(t);
        out.push(LossDistribution::new(t, clean(state.clone()))?);
    }
    Ok(out)
}

/// Zeroes round-off negatives and renormalizes away the last ulps of drift.
pub(crate) fn clean(mut probs: Vec<f64>) -> Vec<f64> {
    for p in probs.iter_mut() {
        if *p < 0.0 {
            debug_assert!(*p > -1e-12, "probability {p} far below zero");
            *p = 0.0;
        }
    }
    let total: f64 = probs.iter().sum();
    if total > 0.0 && (total - 1.0).abs() < 1e-9 {
        for p in probs.iter_mut() {
            *p /= total;
        }
    }
    probs
}
