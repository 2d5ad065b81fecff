//! Discount curves, quote panels and payment schedules.

mod curve;
mod dates;
mod quotes;

pub use curve::{load_curve, DiscountCurve, DiscountFunction, Pillar};
pub use dates::{format_date, next_imm_date, parse_date, year_fraction, PaymentSchedule};
pub use quotes::{
    load_quotes, IndexQuote, MaturityBucket, QuotePanel, TrancheQuote, EQUITY_RUNNING_BP,
};
