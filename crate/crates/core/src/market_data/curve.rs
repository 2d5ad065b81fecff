use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::dates::{format_date, parse_date, year_fraction};
use crate::error::{Error, Result};

/// Anything that can hand out deterministic discount factors `D(0, t)`.
pub trait DiscountFunction {
    fn discount_factor(&self, t: f64) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pillar {
    pub date: NaiveDate,
    /// Continuously compounded zero rate, ACT/365.
    pub zero_rate: f64,
}

/// Zero-rate curve, linear in the rate between pillars and flat beyond both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountCurve {
    valuation_date: NaiveDate,
    pillars: Vec<Pillar>,
    #[serde(skip)]
    times: Vec<f64>,
}

impl DiscountCurve {
    pub fn new(valuation_date: NaiveDate, pillars: Vec<Pillar>) -> Result<Self> {
        if pillars.is_empty() {
            return Err(Error::validation("no pillars"));
        }
        for w in pillars.windows(2) {
            if w[1].date <= w[0].date {
                return Err(Error::validation(format!(
                    "pillar dates must be strictly increasing: {} follows {}",
                    format_date(w[1].date),
                    format_date(w[0].date)
                )));
            }
        }
        if let Some(p) = pillars.iter().find(|p| !p.zero_rate.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite rate at {}",
                format_date(p.date)
            )));
        }
        let times = pillars
            .iter()
            .map(|p| year_fraction(valuation_date, p.date))
            .collect();
        Ok(Self {
            valuation_date,
            pillars,
            times,
        })
    }

    /// A curve with one pillar: flat continuously compounded rate.
    pub fn flat(valuation_date: NaiveDate, rate: f64) -> Result<Self> {
        let date = valuation_date + chrono::Days::new(365);
        Self::new(
            valuation_date,
            vec![Pillar {
                date,
                zero_rate: rate,
            }],
        )
    }

    pub fn valuation_date(&self) -> NaiveDate {
        self.valuation_date
    }

    pub fn pillars(&self) -> &[Pillar] {
        &self.pillars
    }

    /// Interpolated zero rate at year fraction `t`.
    pub fn zero_rate(&self, t: f64) -> f64 {
        let (times, pillars) = (&self.times, &self.pillars);
        if t <= times[0] {
            return pillars[0].zero_rate;
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return pillars[last].zero_rate;
        }
        let i = times.partition_point(|&x| x <= t);
        let (t0, t1) = (times[i - 1], times[i]);
        let (r0, r1) = (pillars[i - 1].zero_rate, pillars[i].zero_rate);
        r0 + (r1 - r0) * (t - t0) / (t1 - t0)
    }
}

impl DiscountFunction for DiscountCurve {
    fn discount_factor(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!(
                "discount factor requested at negative time {t}"
            )));
        }
        Ok((-self.zero_rate(t) * t).exp())
    }
}

/// Reads a `date,zero_rate` CSV. Rates may be decimals (`0.0341`) or percents (`3.41%`).
pub fn load_curve<R: Read>(source: R, valuation_date: NaiveDate) -> Result<DiscountCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut pillars = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if record.len() < 2 {
            return Err(Error::parse(line, "expected `date,zero_rate`"));
        }
        let date = parse_date(&record[0])
            .ok_or_else(|| Error::parse(line, format!("bad date `{}`", &record[0])))?;
        let zero_rate = parse_rate(&record[1])
            .ok_or_else(|| Error::parse(line, format!("bad rate `{}`", &record[1])))?;
        pillars.push(Pillar { date, zero_rate });
    }
    DiscountCurve::new(valuation_date, pillars)
}

fn parse_rate(raw: &str) -> Option<f64> {
    let s = raw.trim();
    match s.strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().ok().map(|x| x / 100.0),
        None => s.parse::<f64>().ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val() -> NaiveDate {
        NaiveDate::from_ymd_opt(2006, 10, 2).unwrap()
    }

    const SAMPLE: &str = "date,zero_rate\n20-Dec-06, 3.41%\n20-Mar-07,3.57%\n20-Jun-07,0.0366\n";

    #[test]
    fn loads_percent_and_decimal_rates() {
        let c = load_curve(SAMPLE.as_bytes(), val()).unwrap();
        assert_eq!(c.pillars().len(), 3);
        assert_eq!(
            c.pillars()[0].date,
            NaiveDate::from_ymd_opt(2006, 12, 20).unwrap()
        );
        assert!((c.pillars()[0].zero_rate - 0.0341).abs() < 1e-15);
        assert!((c.pillars()[2].zero_rate - 0.0366).abs() < 1e-15);
    }

    #[test]
    fn empty_file_has_no_pillars() {
        let err = load_curve("date,zero_rate\n".as_bytes(), val()).unwrap_err();
        assert!(err.to_string().contains("no pillars"));
    }

    #[test]
    fn out_of_order_rows_rejected() {
        let src = "date,zero_rate\n20-Mar-07,3.57%\n20-Dec-06,3.41%\n";
        assert!(matches!(
            load_curve(src.as_bytes(), val()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_row_names_line() {
        let src = "date,zero_rate\n20-Dec-06,3.41%\nnot-a-date,3%\n";
        match load_curve(src.as_bytes(), val()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn discount_at_zero_and_pillar() {
        let c = load_curve(SAMPLE.as_bytes(), val()).unwrap();
        assert_eq!(c.discount_factor(0.0).unwrap(), 1.0);
        let t = year_fraction(val(), NaiveDate::from_ymd_opt(2006, 12, 20).unwrap());
        assert!((c.discount_factor(t).unwrap() - (-0.0341 * t).exp()).abs() < 1e-15);
        assert!(c.discount_factor(-0.1).is_err());
    }

    #[test]
    fn discount_between_pillars_matches_hand_interpolation() {
        let c = load_curve(SAMPLE.as_bytes(), val()).unwrap();
        // 20-Dec-06 is 79 days out, 20-Mar-07 is 169 days out.
        let (t0, t1) = (79.0 / 365.0, 169.0 / 365.0);
        let t = 0.5 * (t0 + t1);
        let r = 0.5 * (0.0341 + 0.0357);
        assert!((c.discount_factor(t).unwrap() - (-r * t).exp()).abs() < 1e-15);
        // flat extrapolation at both ends
        assert!((c.zero_rate(0.01) - 0.0341).abs() < 1e-15);
        assert!((c.zero_rate(30.0) - 0.0366).abs() < 1e-15);
    }
}
