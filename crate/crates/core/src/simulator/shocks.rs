use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_engine::IntensitySchedule;
use crate::model::PoolSpec;

/// One firing of a cluster shock: every name in `cluster` is hit at `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockEvent {
    pub time: f64,
    /// Row of the schedule the shock came from; breaks ties on equal times.
    pub mode: usize,
    pub cluster: Vec<u32>,
}

/// Per-path generator: ChaCha8 keyed by `seed`, with the path index as stream id,
/// so paths are independent and reproducible in any evaluation order.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Time at which mode `j`'s cumulated rate reaches `target`, if before `horizon`.
fn invert_cumulated(schedule: &IntensitySchedule, j: usize, target: f64, horizon: f64) -> Option<f64> {
    if target > schedule.value(j, horizon) {
        return None;
    }
    let mut t0 = 0.0;
    let mut v0 = 0.0;
    let breaks = schedule
        .knots
        .iter()
        .copied()
        .filter(|&k| k < horizon)
        .chain(std::iter::once(horizon));
    for t1 in breaks {
        let v1 = schedule.value(j, t1);
        if target <= v1 && v1 > v0 {
            return Some(t0 + (t1 - t0) * (target - v0) / (v1 - v0));
        }
        t0 = t1;
        v0 = v1;
    }
    None
}

/// Shock arrivals on `[0, horizon]`.
///
/// Each schedule row is the cumulated rate of the size-`alpha_j` aggregate, so its
/// arrivals are an inhomogeneous Poisson process obtained by inverting the
/// piecewise-linear cumulated rate at unit-rate exponential sums. Each arrival
/// hits a uniformly drawn subset of `alpha_j` names.
pub fn sample_shock_stream<R: Rng + ?Sized>(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<ShockEvent>> {
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let mut events = Vec::new();
    for (j, &amplitude) in schedule.amplitudes.iter().enumerate() {
        let mut level = 0.0;
        loop {
            let u: f64 = rng.gen();
            level += -(1.0 - u).ln();
            match invert_cumulated(schedule, j, level, horizon) {
                Some(time) => {
                    let cluster = index::sample(rng, pool.size, amplitude)
                        .into_iter()
                        .map(|i| i as u32)
                        .collect();
                    events.push(ShockEvent {
                        time,
                        mode: j,
                        cluster,
                    });
                }
                None => break,
            }
        }
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.mode.cmp(&b.mode)));
    Ok(events)
}
