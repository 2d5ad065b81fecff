//! Date parsing, ACT/365 year fractions and quarterly IMM-style payment schedules.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DAYS_PER_YEAR: f64 = 365.0;

/// Parses `DD-Mon-YY` (as printed in market tables) or ISO `YYYY-MM-DD`.
pub fn parse_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    NaiveDate::parse_from_str(s, "%d-%b-%y")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y-%m-%d"))
        .or_else(|_| NaiveDate::parse_from_str(s, "%d-%b-%Y"))
        .ok()
}

/// Formats a date the way the fixture files do, e.g. `20-Dec-06`.
pub fn format_date(date: NaiveDate) -> String {
    date.format("%d-%b-%y").to_string()
}

/// ACT/365 year fraction between two dates (negative if `to` precedes `from`).
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

/// Premium payment dates `T_1 < ... < T_b` with their ACT/365 accrual fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentSchedule {
    pub valuation_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
}

impl PaymentSchedule {
    pub fn new(valuation_date: NaiveDate, dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::validation("payment schedule has no dates"));
        }
        let mut prev = valuation_date;
        for d in &dates {
            if *d <= prev {
                return Err(Error::validation(format!(
                    "payment dates must be strictly increasing and after the valuation date ({} after {})",
                    format_date(*d),
                    format_date(prev)
                )));
            }
            prev = *d;
        }
        Ok(Self {
            valuation_date,
            dates,
        })
    }

    /// Quarterly schedule on the 20th of Mar/Jun/Sep/Dec, with `maturity` as the
    /// final date whether or not it falls on that grid.
    pub fn quarterly_imm(valuation_date: NaiveDate, maturity: NaiveDate) -> Result<Self> {
        if maturity <= valuation_date {
            return Err(Error::validation(format!(
                "maturity {} is not after valuation date {}",
                format_date(maturity),
                format_date(valuation_date)
            )));
        }
        let mut dates = Vec::new();
        let mut cursor = next_imm_date(valuation_date);
        while cursor < maturity {
            dates.push(cursor);
            cursor = add_quarter(cursor);
        }
        dates.push(maturity);
        Self::new(valuation_date, dates)
    }

    pub fn maturity(&self) -> NaiveDate {
        *self.dates.last().expect("schedule is never empty")
    }

    /// Payment times as year fractions from the valuation date.
    pub fn times(&self) -> Vec<f64> {
        self.dates
            .iter()
            .map(|d| year_fraction(self.valuation_date, *d))
            .collect()
    }

    /// Accrual fractions `T_i - T_{i-1}` with `T_0` the valuation date.
    pub fn accruals(&self) -> Vec<f64> {
        let mut prev = self.valuation_date;
        self.dates
            .iter()
            .map(|d| {
                let delta = year_fraction(prev, *d);
                prev = *d;
                delta
            })
            .collect()
    }
}

/// First 20th of Mar/Jun/Sep/Dec strictly after `date`.
pub fn next_imm_date(date: NaiveDate) -> NaiveDate {
    let (mut year, mut month) = (date.year(), date.month());
    loop {
        if month % 3 == 0 {
            let candidate = NaiveDate::from_ymd_opt(year, month, 20).expect("20th always exists");
            if candidate > date {
                return candidate;
            }
        }
        month += 1;
        if month > 12 {
            month = 1;
            year += 1;
        }
    }
}

fn add_quarter(date: NaiveDate) -> NaiveDate {
    let mut month = date.month() + 3;
    let mut year = date.year();
    if month > 12 {
        month -= 12;
        year += 1;
    }
    NaiveDate::from_ymd_opt(year, month, date.day()).expect("day 20 exists in every month")
}
