//! Index and tranche legs on a precomputed loss-distribution grid.

mod legs;
mod report;
mod surface;
mod tranche;

pub use legs::{
    default_leg, index_legs, index_spread, tranche_legs, tranche_premium_leg,
    tranche_spread_or_upfront, LegValues, QuoteConvention,
};
pub use report::{price_panel, Instrument, InstrumentKind, PanelPricer, PricedQuote, PricingReport};
pub use surface::{leg_grid, merge_grids, LossSurface};
pub use tranche::{expected_tranched_loss, tranched_loss, TrancheDef};

/// Default refinement of the default-leg integration grid, in days.
pub const DEFAULT_GRID_STEP_DAYS: f64 = 30.0;
