//! Exact laws of the pool default count.
//!
//! GPCL goes through the forward Kolmogorov equation of the counting chain;
//! GPL is a capped compound Poisson sum handled by Panjer's recursion.

mod binomial;
mod distribution;
mod expm;
mod generator;
mod gpcl;
mod gpl;
mod intensity;
mod schedule;

pub use binomial::LogBinomial;
pub use distribution::{LossDistribution, NORMALIZATION_TOL};
pub use expm::{expm, matrix_exponential, PADE_ORDER};
pub use generator::{build_cumulated_generator, surviving_fractions, JumpGenerator, RateMatrix};
pub use gpcl::{gpcl_distribution, gpcl_term_structure};
pub use gpl::{capped_compound_poisson, gpl_distribution};
pub use intensity::{cluster_rates_at, counting_intensity, intensity_ratio_curve, ClusterRate};
pub use schedule::IntensitySchedule;

use crate::error::Result;
use crate::model::{ModelKind, PoolSpec};

/// Distribution at `t` for whichever model the schedule belongs to.
pub fn distribution(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    t: f64,
) -> Result<LossDistribution> {
    match schedule.model {
        ModelKind::Gpl => gpl_distribution(pool, schedule, t),
        ModelKind::Gpcl => gpcl_distribution(pool, schedule, t),
    }
}

/// Distributions at sorted `times`, using the fast stepping path for GPCL.
pub fn term_structure(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    times: &[f64],
) -> Result<Vec<LossDistribution>> {
    match schedule.model {
        ModelKind::Gpl => times
            .iter()
            .map(|&t| gpl_distribution(pool, schedule, t))
            .collect(),
        ModelKind::Gpcl => gpcl_term_structure(pool, schedule, times),
    }
}

/// Cluster intensity `Lambda~_j(t)` from a GPCL schedule stored in table convention.
pub fn cluster_lambda_from_table(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    amplitude: usize,
    t: f64,
) -> Result<f64> {
    schedule.cluster_lambda(pool, amplitude, t)
}
