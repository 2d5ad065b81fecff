use super::binomial::LogBinomial;
use super::schedule::IntensitySchedule;
use crate::error::{Error, Result};
use crate::model::{PoolSpec, Strategy};

/// Common intensity `lambda~_j` of every cluster of size `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterRate {
    pub amplitude: usize,
    pub rate: f64,
}

/// Cluster rates implied by a schedule's cumulated values at `t`, dividing each
/// table value by `C(M, alpha_j)`. Only ratios across modes matter for the
/// intensity-ratio curves, so cumulated values stand in for rates.
pub fn cluster_rates_at(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    t: f64,
) -> Result<Vec<ClusterRate>> {
    schedule.validate(pool)?;
    let binom = LogBinomial::new(pool.size);
    Ok(schedule
        .amplitudes
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let v = schedule.value(j, t);
            let rate = if v > 0.0 {
                (v.ln() - binom.ln_choose(pool.size, a)).exp()
            } else {
                0.0
            };
            ClusterRate { amplitude: a, rate }
        })
        .collect())
}

/// Intensity of the pool counting process when `count` names have defaulted,
/// for size-homogeneous cluster intensities.
pub fn counting_intensity(
    strategy: Strategy,
    pool: &PoolSpec,
    rates: &[ClusterRate],
    count: usize,
) -> Result<f64> {
    let m = pool.size;
    if count > m {
        return Err(Error::domain(format!(
            "count {count} outside 0..={m}"
        )));
    }
    let binom = LogBinomial::new(m);
    // C(n, j) * lambda~_j evaluated in log space
    let weighted = |n: usize, r: &ClusterRate| -> f64 {
        if r.rate <= 0.0 || r.amplitude > n {
            0.0
        } else {
            (binom.ln_choose(n, r.amplitude) + r.rate.ln()).exp()
        }
    };
    let repeated: f64 = rates
        .iter()
        .map(|r| r.amplitude as f64 * weighted(m, r))
        .sum();
    let h = match strategy {
        Strategy::Repeated => repeated,
        Strategy::S0 => {
            let room = m - count;
            rates
                .iter()
                .map(|r| r.amplitude.min(room) as f64 * weighted(m, r))
                .sum()
        }
        Strategy::S1 => (1.0 - count as f64 / m as f64) * repeated,
        Strategy::S2 => rates
            .iter()
            .map(|r| r.amplitude as f64 * weighted(m - count, r))
            .sum(),
    };
    Ok(h)
}

/// `h(c) / h(0)` for `c = 0..=M`.
pub fn intensity_ratio_curve(
    strategy: Strategy,
    pool: &PoolSpec,
    rates: &[ClusterRate],
) -> Result<Vec<f64>> {
    let h0 = counting_intensity(strategy, pool, rates, 0)?;
    if h0 <= 0.0 {
        return Err(Error::domain("all cluster intensities are zero"));
    }
    if strategy == Strategy::S1 {
        // exact: h(c) is h(0) scaled by the surviving fraction
        let m = pool.size as f64;
        return Ok((0..=pool.size).map(|c| 1.0 - c as f64 / m).collect());
    }
    (0..=pool.size)
        .map(|c| counting_intensity(strategy, pool, rates, c).map(|h| h / h0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rates() -> Vec<ClusterRate> {
        vec![
            ClusterRate { amplitude: 1, rate: 0.02 },
            ClusterRate { amplitude: 3, rate: 1e-5 },
            ClusterRate { amplitude: 125, rate: 0.004 },
        ]
    }

    #[test]
    fn strategies_agree_before_any_default() {
        let pool = PoolSpec::default();
        let h: Vec<f64> = Strategy::ALL
            .iter()
            .map(|&s| counting_intensity(s, &pool, &rates(), 0).unwrap())
            .collect();
        for x in &h[1..] {
            assert!((x - h[0]).abs() < 1e-12 * h[0]);
        }
    }

    #[test]
    fn strategy_one_is_linear() {
        let pool = PoolSpec::default();
        let h0 = counting_intensity(Strategy::S1, &pool, &rates(), 0).unwrap();
        for c in [1, 17, 62, 125] {
            let h = counting_intensity(Strategy::S1, &pool, &rates(), c).unwrap();
            assert!((h / h0 - (1.0 - c as f64 / 125.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn strategy_two_vanishes_on_full_pool() {
        let pool = PoolSpec::default();
        assert_eq!(
            counting_intensity(Strategy::S2, &pool, &rates(), 125).unwrap(),
            0.0
        );
        assert!(counting_intensity(Strategy::S2, &pool, &rates(), 126).is_err());
    }

    #[test]
    fn hand_values_small_pool() {
        // M = 4, lambda~_1 = 0.1, lambda~_2 = 0.05
        let pool = PoolSpec::new(4, 0.4).unwrap();
        let r = vec![
            ClusterRate { amplitude: 1, rate: 0.1 },
            ClusterRate { amplitude: 2, rate: 0.05 },
        ];
        let close = |a: f64, b: f64| (a - b).abs() < 1e-14;
        // repeated: 1*4*0.1 + 2*6*0.05 = 1.0
        assert!(close(counting_intensity(Strategy::Repeated, &pool, &r, 3).unwrap(), 1.0));
        // s0 at c=3: min(1,1)*0.4 + min(2,1)*0.3 = 0.7
        assert!(close(counting_intensity(Strategy::S0, &pool, &r, 3).unwrap(), 0.7));
        // s2 at c=2: 1*2*0.1 + 2*1*0.05 = 0.3
        assert!(close(counting_intensity(Strategy::S2, &pool, &r, 2).unwrap(), 0.3));
    }
}
