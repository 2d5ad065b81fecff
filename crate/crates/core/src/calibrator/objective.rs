use crate::error::{Error, Result};
use crate::loss_engine::IntensitySchedule;
use crate::pricer::PanelPricer;

/// `(model - mid) / width`, with the width taken as the positive bid-ask spread.
pub fn weighted_error(model: f64, mid: f64, width: f64) -> Result<f64> {
    let w = width.abs();
    if !(w > 0.0) {
        return Err(Error::validation(format!("bid-ask width must be non-zero, got {width}")));
    }
    Ok((model - mid) / w)
}

/// Sum of squared weighted errors over the panel, with the errors themselves.
pub fn objective(pricer: &PanelPricer, schedule: &IntensitySchedule) -> Result<(f64, Vec<f64>)> {
    let errors = pricer.errors(schedule)?;
    Ok((sum_sq(&errors), errors))
}

pub(crate) fn sum_sq(e: &[f64]) -> f64 {
    e.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        assert_eq!(weighted_error(30.0, 30.0, 0.5).unwrap(), 0.0);
        assert_eq!(weighted_error(30.5, 30.0, 0.5).unwrap(), 1.0);
        assert_eq!(weighted_error(29.0, 30.0, -0.5).unwrap(), -2.0);
        assert!(weighted_error(1.0, 1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn antisymmetric_around_mid(mid in -1e3f64..1e3, d in 0.0f64..1e3, w in 1e-3f64..1e2) {
            let up = weighted_error(mid + d, mid, w).unwrap();
            let down = weighted_error(mid - d, mid, w).unwrap();
            prop_assert!((up + down).abs() <= 1e-9 * (1.0 + up.abs()));
        }
    }

    #[test]
    fn finite_difference_signs() {
        use crate::calibrator::testkit;
        use crate::model::ModelKind;
        let base = vec![vec![0.6, 0.9], vec![0.02, 0.05], vec![0.001, 0.002]];
        let build = |x: &[Vec<f64>]| {
            IntensitySchedule::from_increments(ModelKind::Gpcl, vec![1, 10, 125], testkit::knots(), x).unwrap()
        };
        let s = build(&base);
        let pricer = testkit::synthetic(&s);
        let (f0, e0) = objective(&pricer, &s).unwrap();
        assert!(f0 < 1e-16);
        // instrument order per bucket: index, 0-3 upfront, 3-6, 6-9, 22-100
        let bump = |j: usize, k: usize| {
            let mut x = base.clone();
            x[j][k] += 1e-3;
            objective(&pricer, &build(&x)).unwrap().1
        };
        let single = bump(0, 0);
        assert!(single[0] > e0[0] && single[1] > e0[1] && single[5] > e0[5]);
        let senior = bump(2, 1);
        assert_eq!(&senior[..5], &e0[..5]);
        assert!(senior[9] > e0[9] && senior[5] > e0[5]);
        // moving off the optimum only raises the objective
        assert!(objective(&pricer, &build(&bump_all(&base))).unwrap().0 > f0);
    }

    fn bump_all(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| r.iter().map(|v| v * 1.01).collect()).collect()
    }
}
