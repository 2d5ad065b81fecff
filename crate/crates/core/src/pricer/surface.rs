use crate::error::{Error, Result};
use crate::loss_engine::{self, IntensitySchedule, LossDistribution};
use crate::market_data::PaymentSchedule;
use crate::model::PoolSpec;

const TIME_MATCH: f64 = 1e-9;

/// Days per year used to turn a refinement step in days into a year fraction.
const DAYS_PER_YEAR: f64 = 365.0;

/// Default-leg integration times for one schedule: `0`, every payment time, and
/// equal subdivisions of each accrual period no longer than `step_days`.
pub fn leg_grid(schedule: &PaymentSchedule, step_days: f64) -> Result<Vec<f64>> {
    if !(step_days > 0.0) || !step_days.is_finite() {
        return Err(Error::validation(format!("grid step must be positive, got {step_days}")));
    }
    let step = step_days / DAYS_PER_YEAR;
    let mut grid = vec![0.0];
    let mut prev = 0.0;
    for t in schedule.times() {
        let n = ((t - prev) / step).ceil().max(1.0) as usize;
        for i in 1..n {
            grid.push(prev + (t - prev) * i as f64 / n as f64);
        }
        grid.push(t);
        prev = t;
    }
    Ok(grid)
}

/// Sorted union of several grids, merging times closer than the match tolerance.
pub fn merge_grids<'a>(grids: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut all: Vec<f64> = grids.into_iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup_by(|b, a| (*b - *a).abs() < TIME_MATCH);
    all
}

/// Count distributions precomputed on a time grid, shared read-only by the legs.
#[derive(Debug, Clone)]
pub struct LossSurface {
    pub pool: PoolSpec,
    times: Vec<f64>,
    dists: Vec<LossDistribution>,
}

impl LossSurface {
    /// Runs the exact engine for `schedule` on `times` (zero is always included).
    pub fn build(pool: &PoolSpec, schedule: &IntensitySchedule, times: &[f64]) -> Result<Self> {
        let mut ts = merge_grids([times]);
        if ts.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::domain("grid times must be non-negative"));
        }
        ts.retain(|&t| t > TIME_MATCH);
        let mut dists = vec![LossDistribution::point_mass(0.0, pool.size, 0)];
        dists.extend(loss_engine::term_structure(pool, schedule, &ts)?);
        let mut times = vec![0.0];
        times.extend(ts);
        Ok(Self {
            pool: *pool,
            times,
            dists,
        })
    }

    pub fn from_distributions(pool: &PoolSpec, mut dists: Vec<LossDistribution>) -> Result<Self> {
        dists.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(d) = dists.iter().find(|d| d.pool_size() != pool.size) {
            return Err(Error::validation(format!(
                "distribution at t={} has pool size {}, expected {}",
                d.t,
                d.pool_size(),
                pool.size
            )));
        }
        if dists.first().map_or(true, |d| d.t > TIME_MATCH) {
            dists.insert(0, LossDistribution::point_mass(0.0, pool.size, 0));
        }
        Ok(Self {
            pool: *pool,
            times: dists.iter().map(|d| d.t).collect(),
            dists,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn distributions(&self) -> &[LossDistribution] {
        &self.dists
    }

    /// Distribution at a grid time.
    pub fn at(&self, t: f64) -> Result<&LossDistribution> {
        let i = self.times.partition_point(|&x| x < t - TIME_MATCH);
        match self.times.get(i) {
            Some(&x) if (x - t).abs() < TIME_MATCH => Ok(&self.dists[i]),
            _ => Err(Error::domain(format!("no distribution on the grid at t={t}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn grid_contains_payment_dates_and_respects_step() {
        let val = NaiveDate::from_ymd_opt(2006, 10, 2).unwrap();
        let mat = NaiveDate::from_ymd_opt(2011, 12, 20).unwrap();
        let s = PaymentSchedule::quarterly_imm(val, mat).unwrap();
        let g = leg_grid(&s, 30.0).unwrap();
        assert_eq!(g[0], 0.0);
        for t in s.times() {
            assert!(g.iter().any(|&x| x == t));
        }
        assert!(g.windows(2).all(|w| w[1] > w[0] && w[1] - w[0] <= 30.0 / 365.0 + 1e-12));
        assert!(leg_grid(&s, 0.0).is_err());
    }

    #[test]
    fn lookup_is_exact_on_grid_only() {
        let pool = PoolSpec::default();
        let d = vec![
            LossDistribution::point_mass(2.0, 125, 3),
            LossDistribution::point_mass(1.0, 125, 1),
        ];
        let s = LossSurface::from_distributions(&pool, d).unwrap();
        assert_eq!(s.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.at(1.0).unwrap().mean_count(), 1.0);
        assert!(s.at(1.5).is_err());
    }
}
