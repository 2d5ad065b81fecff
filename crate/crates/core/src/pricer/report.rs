use std::io::Write;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::legs::{tranche_spread_or_upfront, LegValues, QuoteConvention};
use super::surface::{leg_grid, merge_grids, LossSurface};
use super::tranche::{tranched_loss, TrancheDef};
use crate::calibrator::weighted_error;
use crate::error::{Error, Result};
use crate::loss_engine::IntensitySchedule;
use crate::market_data::{format_date, DiscountCurve, DiscountFunction, PaymentSchedule, QuotePanel};
use crate::model::{ModelKind, PoolSpec};

const BP: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentKind {
    /// Index spread in bp.
    Index,
    /// Tranche running spread in bp.
    Tranche,
    /// Tranche upfront as a fraction of notional, on top of a fixed running spread.
    Upfront,
}

/// One quoted instrument, in the units its quote is stored in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instrument {
    pub bucket: usize,
    pub maturity: NaiveDate,
    pub kind: InstrumentKind,
    pub tranche: TrancheDef,
    pub mid: f64,
    pub width: f64,
    /// Fixed running spread (per unit) for upfront-quoted tranches.
    pub running_spread: f64,
}

impl Instrument {
    pub fn label(&self) -> String {
        match self.kind {
            InstrumentKind::Index => "index".into(),
            _ => self.tranche.label(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedQuote {
    pub maturity: String,
    pub instrument: String,
    pub kind: InstrumentKind,
    pub model_value: f64,
    pub market_mid: f64,
    pub bid_ask_width: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingReport {
    pub model: ModelKind,
    pub schedule_hash: String,
    pub pool: PoolSpec,
    pub valuation_date: String,
    pub grid_step_days: f64,
    pub quotes: Vec<PricedQuote>,
    /// Sum of squared errors.
    pub objective: f64,
}

impl PricingReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Errors laid out with instruments as rows and maturities as columns.
    pub fn write_epsilon_table<W: Write>(&self, sink: W) -> Result<()> {
        let mut mats: Vec<&str> = Vec::new();
        let mut rows: Vec<&str> = Vec::new();
        for q in &self.quotes {
            if !mats.contains(&q.maturity.as_str()) {
                mats.push(&q.maturity);
            }
            if !rows.contains(&q.instrument.as_str()) {
                rows.push(&q.instrument);
            }
        }
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["instrument"];
        header.extend(&mats);
        w.write_record(&header)?;
        for r in rows {
            let mut rec = vec![r.to_string()];
            for m in &mats {
                let cell = self
                    .quotes
                    .iter()
                    .find(|q| q.instrument == r && q.maturity == *m)
                    .map_or(String::new(), |q| format!("{:.2}", q.epsilon));
                rec.push(cell);
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<epsilon table>", e))?;
        Ok(())
    }
}

/// Legs of one maturity expressed on the shared grid.
#[derive(Debug, Clone)]
struct BucketLegs {
    /// Positions of the default-leg integration times in the shared grid.
    grid_idx: Vec<usize>,
    /// `D(0, mid)` for each integration interval.
    mid_df: Vec<f64>,
    pay_idx: Vec<usize>,
    /// `delta_i D(0, T_i)`.
    pay_weight: Vec<f64>,
}

/// Prices a whole quote panel from one intensity schedule. The integration grid,
/// discount factors and tranche payoffs are fixed up front, so one engine run
/// serves every instrument.
#[derive(Debug, Clone)]
pub struct PanelPricer {
    pub pool: PoolSpec,
    pub valuation_date: NaiveDate,
    pub grid_step_days: f64,
    schedules: Vec<PaymentSchedule>,
    instruments: Vec<Instrument>,
    grid: Vec<f64>,
    legs: Vec<BucketLegs>,
    /// Tranched-loss payoff per count for each distinct tranche.
    payoffs: Vec<Vec<f64>>,
    /// Payoff used by each instrument.
    payoff_of: Vec<usize>,
    /// Outstanding index notional per count, `1 - c/M`.
    index_outstanding: Vec<f64>,
}

fn position(grid: &[f64], t: f64) -> Result<usize> {
    let i = grid.partition_point(|&x| x < t - 1e-9);
    match grid.get(i) {
        Some(&x) if (x - t).abs() < 1e-9 => Ok(i),
        _ => Err(Error::domain(format!("time {t} missing from the pricing grid"))),
    }
}

impl PanelPricer {
    pub fn new(pool: &PoolSpec, panel: &QuotePanel, curve: &DiscountCurve, grid_step_days: f64) -> Result<Self> {
        pool.validate()?;
        let schedules = panel.schedules()?;
        let grids = schedules
            .iter()
            .map(|s| leg_grid(s, grid_step_days))
            .collect::<Result<Vec<_>>>()?;
        let grid = merge_grids(grids.iter().map(Vec::as_slice));

        let mut legs = Vec::with_capacity(schedules.len());
        for (sched, g) in schedules.iter().zip(&grids) {
            let grid_idx = g.iter().map(|&t| position(&grid, t)).collect::<Result<Vec<_>>>()?;
            let mid_df = g
                .windows(2)
                .map(|w| curve.discount_factor(0.5 * (w[0] + w[1])))
                .collect::<Result<Vec<_>>>()?;
            let times = sched.times();
            let pay_idx = times.iter().map(|&t| position(&grid, t)).collect::<Result<Vec<_>>>()?;
            let pay_weight = times
                .iter()
                .zip(sched.accruals())
                .map(|(&t, d)| curve.discount_factor(t).map(|df| d * df))
                .collect::<Result<Vec<_>>>()?;
            legs.push(BucketLegs {
                grid_idx,
                mid_df,
                pay_idx,
                pay_weight,
            });
        }

        let mut instruments = Vec::new();
        for (i, b) in panel.buckets.iter().enumerate() {
            if let Some(ix) = &b.index {
                instruments.push(Instrument {
                    bucket: i,
                    maturity: b.maturity,
                    kind: InstrumentKind::Index,
                    tranche: TrancheDef::whole_pool(),
                    mid: ix.spread_bp,
                    width: ix.bid_ask_bp,
                    running_spread: 0.0,
                });
            }
            for t in &b.tranches {
                t.validate(panel.valuation_date)?;
                instruments.push(Instrument {
                    bucket: i,
                    maturity: b.maturity,
                    kind: if t.is_upfront {
                        InstrumentKind::Upfront
                    } else {
                        InstrumentKind::Tranche
                    },
                    tranche: TrancheDef::new(t.attachment, t.detachment)?,
                    mid: t.quote,
                    width: t.bid_ask_width,
                    running_spread: t.running_premium_bp.unwrap_or(0.0) / BP,
                });
            }
        }

        let mut tranches: Vec<TrancheDef> = Vec::new();
        let payoff_of = instruments
            .iter()
            .map(|ins| match tranches.iter().position(|t| *t == ins.tranche) {
                Some(p) => p,
                None => {
                    tranches.push(ins.tranche);
                    tranches.len() - 1
                }
            })
            .collect();
        let payoffs = tranches
            .iter()
            .map(|t| {
                (0..=pool.size)
                    .map(|c| tranched_loss(pool.loss_fraction(c), t))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let m = pool.size as f64;
        let index_outstanding = (0..=pool.size).map(|c| 1.0 - c as f64 / m).collect();

        Ok(Self {
            pool: *pool,
            valuation_date: panel.valuation_date,
            grid_step_days,
            schedules,
            instruments,
            grid,
            legs,
            payoffs,
            payoff_of,
            index_outstanding,
        })
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    pub fn schedules(&self) -> &[PaymentSchedule] {
        &self.schedules
    }

    /// Every time at which a distribution is needed.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn surface(&self, schedule: &IntensitySchedule) -> Result<LossSurface> {
        LossSurface::build(&self.pool, schedule, &self.grid)
    }

    /// Model value of every instrument, in quote units.
    pub fn model_values(&self, schedule: &IntensitySchedule) -> Result<Vec<f64>> {
        if self.instruments.is_empty() {
            return Ok(Vec::new());
        }
        let surface = self.surface(schedule)?;
        self.values_on(&surface)
    }

    /// Values on a surface built over this pricer's grid (or a prefix of it).
    pub fn values_on(&self, surface: &LossSurface) -> Result<Vec<f64>> {
        let all = 0..self.schedules.len();
        self.values_in(surface, all)
            .map(|v| v.into_iter().map(|(_, x)| x).collect())
    }

    fn values_in(&self, surface: &LossSurface, buckets: Range<usize>) -> Result<Vec<(usize, f64)>> {
        let dists = surface.distributions();
        let times = surface.times();
        if times.len() > self.grid.len()
            || times.iter().zip(&self.grid).any(|(a, b)| (a - b).abs() > 1e-9)
        {
            return Err(Error::validation("surface was not built on the pricing grid"));
        }
        let expect = |payoff: &[f64], g: usize| -> Result<f64> {
            let d = dists
                .get(g)
                .ok_or_else(|| Error::domain(format!("no distribution at t={}", self.grid[g])))?;
            Ok(d.probs.iter().zip(payoff).map(|(p, x)| p * x).sum())
        };
        // expected payoffs on the grid, filled lazily per distinct tranche
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; self.payoffs.len()];
        let n = dists.len();
        let mut out = Vec::new();
        for (i, ins) in self.instruments.iter().enumerate() {
            if !buckets.contains(&ins.bucket) {
                continue;
            }
            let p = self.payoff_of[i];
            if cache[p].is_none() {
                cache[p] = Some(
                    (0..n)
                        .map(|g| expect(&self.payoffs[p], g))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            let etl = cache[p].as_ref().expect("filled above");
            let legs = &self.legs[ins.bucket];
            let at = |g: usize| {
                etl.get(g)
                    .copied()
                    .ok_or_else(|| Error::domain(format!("no distribution at t={}", self.grid[g])))
            };
            let mut protection = 0.0;
            for (w, df) in legs.grid_idx.windows(2).zip(&legs.mid_df) {
                protection += df * (at(w[1])? - at(w[0])?);
            }
            let mut annuity = 0.0;
            for (&g, &w) in legs.pay_idx.iter().zip(&legs.pay_weight) {
                let outstanding = match ins.kind {
                    InstrumentKind::Index => expect(&self.index_outstanding, g)?,
                    _ => 1.0 - at(g)?,
                };
                annuity += w * outstanding;
            }
            let lv = LegValues {
                default_leg_pv: protection,
                premium_leg_pv_per_unit_spread: annuity,
                upfront_pv: 0.0,
            };
            let v = match ins.kind {
                InstrumentKind::Index | InstrumentKind::Tranche => {
                    tranche_spread_or_upfront(&lv, QuoteConvention::Running)? * BP
                }
                InstrumentKind::Upfront => tranche_spread_or_upfront(
                    &lv,
                    QuoteConvention::Upfront {
                        running_spread: ins.running_spread,
                    },
                )?,
            };
            out.push((i, v));
        }
        Ok(out)
    }

    /// Weighted errors of the instruments in `buckets` only, running the engine
    /// no further than the last of those maturities.
    pub fn bucket_errors(&self, schedule: &IntensitySchedule, buckets: Range<usize>) -> Result<Vec<f64>> {
        if buckets.is_empty() {
            return Ok(Vec::new());
        }
        let last = *self.legs[buckets.end - 1].grid_idx.last().expect("grid is never empty");
        let surface = LossSurface::build(&self.pool, schedule, &self.grid[..=last])?;
        self.values_in(&surface, buckets)?
            .into_iter()
            .map(|(i, v)| weighted_error(v, self.instruments[i].mid, self.instruments[i].width))
            .collect()
    }

    /// Weighted errors `(model - mid) / width` for every instrument.
    pub fn errors(&self, schedule: &IntensitySchedule) -> Result<Vec<f64>> {
        let values = self.model_values(schedule)?;
        self.instruments
            .iter()
            .zip(values)
            .map(|(ins, v)| weighted_error(v, ins.mid, ins.width))
            .collect()
    }

    pub fn price(&self, schedule: &IntensitySchedule) -> Result<PricingReport> {
        let values = self.model_values(schedule)?;
        let mut quotes = Vec::with_capacity(values.len());
        let mut objective = 0.0;
        for (ins, v) in self.instruments.iter().zip(values) {
            let epsilon = weighted_error(v, ins.mid, ins.width)?;
            objective += epsilon * epsilon;
            quotes.push(PricedQuote {
                maturity: format_date(ins.maturity),
                instrument: ins.label(),
                kind: ins.kind,
                model_value: v,
                market_mid: ins.mid,
                bid_ask_width: ins.width,
                epsilon,
            });
        }
        Ok(PricingReport {
            model: schedule.model,
            schedule_hash: schedule.content_hash(),
            pool: self.pool,
            valuation_date: format_date(self.valuation_date),
            grid_step_days: self.grid_step_days,
            quotes,
            objective,
        })
    }
}

/// Convenience wrapper: build a pricer and price `panel` once.
pub fn price_panel(
    pool: &PoolSpec,
    schedule: &IntensitySchedule,
    panel: &QuotePanel,
    curve: &DiscountCurve,
    grid_step_days: f64,
) -> Result<PricingReport> {
    PanelPricer::new(pool, panel, curve, grid_step_days)?.price(schedule)
}
