use serde::{Deserialize, Serialize};

use super::shocks::ShockEvent;
use crate::error::{Error, Result};
use crate::model::{PoolSpec, Strategy};

/// Count change produced by one shock under a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub time: f64,
    pub increment: usize,
    pub count: usize,
}

/// Counting path produced by running a shock stream through a strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub strategy: Strategy,
    pub pool_size: usize,
    pub steps: Vec<Step>,
    /// Per-name default time; tracked only by strategies 1 and 2.
    defaulted_at: Option<Vec<Option<f64>>>,
}

impl Trajectory {
    /// Count at `t` (right-continuous).
    pub fn count_at(&self, t: f64) -> usize {
        let n = self.steps.partition_point(|s| s.time <= t);
        if n == 0 {
            0
        } else {
            self.steps[n - 1].count
        }
    }

    pub fn final_count(&self) -> usize {
        self.steps.last().map_or(0, |s| s.count)
    }

    /// Default flags at `t`, for strategies that keep name identities.
    pub fn defaulted_by(&self, t: f64) -> Option<Vec<bool>> {
        self.defaulted_at
            .as_ref()
            .map(|v| v.iter().map(|d| d.is_some_and(|x| x <= t)).collect())
    }
}

/// Turns a time-sorted shock stream into a counting path.
pub fn apply_strategy(
    pool: &PoolSpec,
    events: &[ShockEvent],
    strategy: Strategy,
) -> Result<Trajectory> {
    if events.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(Error::validation("shock events are not time-sorted"));
    }
    let m = pool.size;
    let mut steps = Vec::with_capacity(events.len());
    let mut running = 0usize;
    let mut count = 0usize;
    let mut defaulted: Vec<Option<f64>> = vec![None; m];

    for e in events {
        if let Some(&k) = e.cluster.iter().find(|&&k| k as usize >= m) {
            return Err(Error::validation(format!("name {k} outside pool of {m}")));
        }
        let increment = match strategy {
            Strategy::Repeated => e.cluster.len(),
            Strategy::S0 => {
                running += e.cluster.len();
                running.min(m) - count
            }
            Strategy::S1 => {
                let mut fresh = 0;
                for &k in &e.cluster {
                    let slot = &mut defaulted[k as usize];
                    if slot.is_none() {
                        *slot = Some(e.time);
                        fresh += 1;
                    }
                }
                fresh
            }
            Strategy::S2 => {
                if e.cluster.iter().all(|&k| defaulted[k as usize].is_none()) {
                    for &k in &e.cluster {
                        defaulted[k as usize] = Some(e.time);
                    }
                    e.cluster.len()
                } else {
                    0
                }
            }
        };
        count += increment;
        steps.push(Step {
            time: e.time,
            increment,
            count,
        });
    }
    Ok(Trajectory {
        strategy,
        pool_size: m,
        steps,
        defaulted_at: strategy.preserves_names().then_some(defaulted),
    })
}

/// Default time of every name, `None` for survivors.
pub fn single_name_default_times(trajectory: &Trajectory) -> Result<Vec<Option<f64>>> {
    trajectory.defaulted_at.clone().ok_or_else(|| {
        Error::validation(format!(
            "strategy {} does not keep name identities",
            trajectory.strategy
        ))
    })
}
