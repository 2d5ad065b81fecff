use serde::{Deserialize, Serialize};

use super::surface::{leg_grid, LossSurface};
use super::tranche::{expected_tranched_loss, TrancheDef};
use crate::error::{Error, Result};
use crate::loss_engine::LossDistribution;
use crate::market_data::{DiscountFunction, PaymentSchedule};

/// Present values per unit of tranche (or pool) notional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LegValues {
    pub default_leg_pv: f64,
    /// Risky annuity: premium leg value for a unit running spread.
    pub premium_leg_pv_per_unit_spread: f64,
    /// Upfront already paid against the protection, if any.
    pub upfront_pv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuoteConvention {
    /// Breakeven running spread, per unit (multiply by 1e4 for bp).
    Running,
    /// Breakeven upfront as a fraction of notional, with a fixed running spread.
    Upfront { running_spread: f64 },
}

/// `sum_i D(mid_i) (E[f](t_i) - E[f](t_{i-1}))` over an integration grid.
fn loss_integral(
    surface: &LossSurface,
    grid: &[f64],
    curve: &dyn DiscountFunction,
    f: &dyn Fn(&LossDistribution) -> f64,
) -> Result<f64> {
    let mut pv = 0.0;
    let mut prev_t = grid[0];
    let mut prev_v = f(surface.at(prev_t)?);
    for &t in &grid[1..] {
        let v = f(surface.at(t)?);
        pv += curve.discount_factor(0.5 * (prev_t + t))? * (v - prev_v);
        prev_t = t;
        prev_v = v;
    }
    Ok(pv)
}

/// `sum_i delta_i D(T_i) n(T_i)` with `n` the outstanding notional fraction.
fn annuity(
    surface: &LossSurface,
    schedule: &PaymentSchedule,
    curve: &dyn DiscountFunction,
    outstanding: &dyn Fn(&LossDistribution) -> f64,
) -> Result<f64> {
    let mut pv = 0.0;
    for (t, delta) in schedule.times().into_iter().zip(schedule.accruals()) {
        pv += delta * curve.discount_factor(t)? * outstanding(surface.at(t)?);
    }
    Ok(pv)
}

/// Protection leg of a tranche up to the schedule's maturity, on the payment
/// dates refined to at most `grid_step_days`, with midpoint discounting.
pub fn default_leg(
    surface: &LossSurface,
    tranche: &TrancheDef,
    curve: &dyn DiscountFunction,
    schedule: &PaymentSchedule,
    grid_step_days: f64,
) -> Result<f64> {
    let grid = leg_grid(schedule, grid_step_days)?;
    let pool = surface.pool;
    loss_integral(surface, &grid, curve, &|d| expected_tranched_loss(d, tranche, &pool))
}

/// Premium leg per unit running spread, accruing on the notional left at each
/// payment date.
pub fn tranche_premium_leg(
    surface: &LossSurface,
    tranche: &TrancheDef,
    curve: &dyn DiscountFunction,
    schedule: &PaymentSchedule,
) -> Result<f64> {
    let pool = surface.pool;
    annuity(surface, schedule, curve, &|d| {
        1.0 - expected_tranched_loss(d, tranche, &pool)
    })
}

pub fn tranche_legs(
    surface: &LossSurface,
    tranche: &TrancheDef,
    curve: &dyn DiscountFunction,
    schedule: &PaymentSchedule,
    grid_step_days: f64,
) -> Result<LegValues> {
    Ok(LegValues {
        default_leg_pv: default_leg(surface, tranche, curve, schedule, grid_step_days)?,
        premium_leg_pv_per_unit_spread: tranche_premium_leg(surface, tranche, curve, schedule)?,
        upfront_pv: 0.0,
    })
}

/// Breakeven quote implied by the legs.
pub fn tranche_spread_or_upfront(legs: &LegValues, convention: QuoteConvention) -> Result<f64> {
    match convention {
        QuoteConvention::Running => {
            if !(legs.premium_leg_pv_per_unit_spread > 0.0) {
                return Err(Error::Numerical(
                    "zero risky annuity: tranche is wiped out with certainty".into(),
                ));
            }
            Ok((legs.default_leg_pv - legs.upfront_pv) / legs.premium_leg_pv_per_unit_spread)
        }
        QuoteConvention::Upfront { running_spread } => {
            Ok(legs.default_leg_pv - running_spread * legs.premium_leg_pv_per_unit_spread)
        }
    }
}

/// Index legs: protection on the pool loss, premium on the surviving name count
/// (recovered notional is not netted out of the premium notional).
pub fn index_legs(
    surface: &LossSurface,
    curve: &dyn DiscountFunction,
    schedule: &PaymentSchedule,
    grid_step_days: f64,
) -> Result<LegValues> {
    let pool = surface.pool;
    let m = pool.size as f64;
    let grid = leg_grid(schedule, grid_step_days)?;
    Ok(LegValues {
        default_leg_pv: loss_integral(surface, &grid, curve, &|d| {
            d.expectation(|c| pool.loss_fraction(c))
        })?,
        premium_leg_pv_per_unit_spread: annuity(surface, schedule, curve, &|d| {
            1.0 - d.mean_count() / m
        })?,
        upfront_pv: 0.0,
    })
}

/// Breakeven index spread, per unit.
pub fn index_spread(
    surface: &LossSurface,
    curve: &dyn DiscountFunction,
    schedule: &PaymentSchedule,
    grid_step_days: f64,
) -> Result<f64> {
    let legs = index_legs(surface, curve, schedule, grid_step_days)?;
    if !(legs.premium_leg_pv_per_unit_spread > 0.0) {
        return Err(Error::Numerical("zero index annuity".into()));
    }
    Ok(legs.default_leg_pv / legs.premium_leg_pv_per_unit_spread)
}
