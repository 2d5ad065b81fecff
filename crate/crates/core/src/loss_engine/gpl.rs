use super::distribution::LossDistribution;
use super::schedule::IntensitySchedule;
use crate::error::{Error, Result};
use crate::model::{ModelKind, PoolSpec};

/// Law of the capped count `min(sum_j alpha_j Z_j, M)` with independent
/// `Z_j ~ Poisson(Lambda0_j(t))`.
///
/// The uncapped sum is compound Poisson with total rate `sum Lambda0_j` and
/// severities `alpha_j` in proportion to `Lambda0_j`, so Panjer's recursion
/// `g(n) = (1/n) sum_j alpha_j Lambda0_j g(n - alpha_j)` gives it exactly on
/// `0..M-1`; everything else lands on `M`.
pub fn gpl_distribution(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    t: f64,
) -> Result<LossDistribution> {
    if schedule.model != ModelKind::Gpl {
        return Err(Error::validation("expected a GPL schedule"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("bad time {t}")));
    }
    pool.validate()?;
    schedule.validate(pool)?;
    let means = schedule.values(t);
    capped_compound_poisson(pool.size, &schedule.amplitudes, &means, t)
}

/// Panjer recursion for a compound Poisson count with integer severities,
/// with all mass at or above `size` lumped into `size`.
pub fn capped_compound_poisson(
    size: usize,
    amplitudes: &[usize],
    means: &[f64],
    t: f64,
) -> Result<LossDistribution> {
    let total: f64 = means.iter().sum();
    let mut g = vec![0.0; size + 1];
    g[0] = (-total).exp();
    if g[0] == 0.0 && total > 0.0 {
        log::warn!("total Poisson mean {total} underflows; all mass goes to the cap");
    }
    let modes: Vec<(usize, f64)> = amplitudes
        .iter()
        .zip(means)
        .filter(|(_, &m)| m > 0.0)
        .map(|(&a, &m)| (a, a as f64 * m))
        .collect();
    for n in 1..size {
        let mut acc = 0.0;
        for &(a, weight) in &modes {
            if a <= n {
                acc += weight * g[n - a];
            }
        }
        g[n] = acc / n as f64;
    }
    let below: f64 = g[..size].iter().sum();
    g[size] = (1.0 - below).max(0.0);
    LossDistribution::new(t, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_pmf(lambda: f64, k: usize) -> f64 {
        let mut p = (-lambda).exp();
        for i in 1..=k {
            p *= lambda / i as f64;
        }
        p
    }

    #[test]
    fn single_unit_amplitude_is_truncated_poisson() {
        let pool = PoolSpec::default();
        let c = 2.3;
        let s = IntensitySchedule::new(ModelKind::Gpl, vec![1], vec![1.0], vec![vec![c]]).unwrap();
        let d = gpl_distribution(&pool, &s, 1.0).unwrap();
        for k in 0..40 {
            assert!((d.probs[k] - poisson_pmf(c, k)).abs() < 1e-15, "k={k}");
        }
        assert!(d.probs[125] < 1e-100);
    }

    #[test]
    fn cap_collects_tail() {
        let pool = PoolSpec::new(5, 0.4).unwrap();
        let s = IntensitySchedule::new(ModelKind::Gpl, vec![3], vec![1.0], vec![vec![1.0]]).unwrap();
        let d = gpl_distribution(&pool, &s, 1.0).unwrap();
        let e = (-1.0f64).exp();
        assert!((d.probs[0] - e).abs() < 1e-15);
        assert!((d.probs[3] - e).abs() < 1e-15);
        assert!((d.probs[5] - (1.0 - 2.0 * e)).abs() < 1e-15);
        assert_eq!(d.probs[1], 0.0);
    }

    #[test]
    fn zero_schedule_is_point_mass() {
        let pool = PoolSpec::default();
        let s = IntensitySchedule::zero(ModelKind::Gpl, vec![1, 2], vec![1.0]).unwrap();
        let d = gpl_distribution(&pool, &s, 3.0).unwrap();
        assert_eq!(d.probs[0], 1.0);
    }

    /// Direct convolution of the Poisson laws of `alpha_j Z_j`, then the cap.
    fn brute_force(size: usize, amplitudes: &[usize], means: &[f64]) -> Vec<f64> {
        let support = 40 * size;
        let mut law = vec![0.0; support + 1];
        law[0] = 1.0;
        for (&a, &m) in amplitudes.iter().zip(means) {
            let mut mode = vec![0.0; support + 1];
            let mut z = 0;
            while z * a <= support {
                mode[z * a] = poisson_pmf(m, z);
                z += 1;
            }
            let mut next = vec![0.0; support + 1];
            for (i, &p) in law.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (j, &q) in mode.iter().enumerate().take(support + 1 - i) {
                    next[i + j] += p * q;
                }
            }
            law = next;
        }
        let mut capped = law[..size].to_vec();
        capped.push(1.0 - capped.iter().sum::<f64>());
        capped
    }

    #[test]
    fn panjer_matches_convolution_small_pools() {
        let cases: [(usize, &[usize], &[f64]); 4] = [
            (5, &[1, 2], &[0.7, 0.3]),
            (12, &[1, 3, 12], &[1.4, 0.5, 0.05]),
            (30, &[1, 2, 7, 19], &[2.2, 0.8, 0.3, 0.02]),
            (30, &[4, 30], &[3.0, 0.1]),
        ];
        for (m, a, means) in cases {
            let d = capped_compound_poisson(m, a, means, 1.0).unwrap();
            let b = brute_force(m, a, means);
            for k in 0..=m {
                assert!((d.probs[k] - b[k]).abs() < 1e-12, "M={m} k={k}: {} vs {}", d.probs[k], b[k]);
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn normalized_and_survival_monotone(
            amps in proptest::collection::vec(1usize..=125, 1..5),
            inc in proptest::collection::vec(0.0f64..2.0, 10),
            k in 1usize..125,
        ) {
            let pool = PoolSpec::default();
            let mut a = amps.clone();
            a.sort_unstable();
            a.dedup();
            let rows: Vec<Vec<f64>> = a.iter().enumerate().map(|(j, _)| vec![inc[2 * j], inc[2 * j + 1]]).collect();
            let s = IntensitySchedule::from_increments(ModelKind::Gpl, a, vec![2.0, 5.0], &rows).unwrap();
            let mut prev: Option<LossDistribution> = None;
            for t in [0.5, 2.0, 3.5, 5.0, 6.0] {
                let d = gpl_distribution(&pool, &s, t).unwrap();
                proptest::prop_assert!(d.probs.iter().all(|&p| p >= 0.0));
                proptest::prop_assert!((d.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                if let Some(p) = &prev {
                    proptest::prop_assert!(d.survival(k) >= p.survival(k) - 1e-12);
                }
                prev = Some(d);
            }
        }
    }
}
