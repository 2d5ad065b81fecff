//! Joint calibration of cumulated intensities to index and tranche quotes.

mod fit;
mod greedy;
pub mod nelder_mead;
mod objective;

pub use fit::{fit_intensities, Fit, FitBudget};
pub use greedy::{greedy_calibrate, CalibrationResult, CandidateScore, GreedySettings, GreedyStep};
pub use objective::{objective, weighted_error};
