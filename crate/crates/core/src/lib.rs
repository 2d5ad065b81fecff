//! Common-shock cluster default models for portfolio credit.
//!
//! Exact default-count distributions (GPL by Panjer recursion, GPCL by the
//! forward Kolmogorov equation), a Monte Carlo engine for the four ways of
//! turning repeated cluster shocks into defaults, CDO tranche and index
//! pricing, and greedy joint calibration to tranche quote panels.

pub mod calibrator;
pub mod cli;
pub mod error;
pub mod loss_engine;
pub mod market_data;
pub mod model;
pub mod pricer;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{ModelKind, PoolSpec, Strategy};
