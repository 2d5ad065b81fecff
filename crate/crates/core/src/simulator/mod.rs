//! Monte Carlo of the underlying cluster shocks and of the four ways of turning
//! them into pool defaults.

mod empirical;
mod paths;
mod shocks;

pub use empirical::{empirical_distribution, empirical_distributions, EmpiricalDistribution};
pub use paths::{apply_strategy, single_name_default_times, Step, Trajectory};
pub use shocks::{path_rng, sample_shock_stream, ShockEvent};
