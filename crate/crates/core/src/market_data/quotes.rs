use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::dates::{format_date, parse_date, PaymentSchedule};
use crate::error::{Error, Result};

/// Running premium paid alongside an upfront equity quote.
pub const EQUITY_RUNNING_BP: f64 = 500.0;

const BP_PER_UNIT: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexQuote {
    pub maturity: NaiveDate,
    pub spread_bp: f64,
    pub bid_ask_bp: f64,
}

/// A tranche quote. Running quotes are in basis points; upfront quotes are
/// fractions of tranche notional (1975 bp upfront is stored as 0.1975).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrancheQuote {
    pub attachment: f64,
    pub detachment: f64,
    pub maturity: NaiveDate,
    pub quote: f64,
    pub bid_ask_width: f64,
    pub is_upfront: bool,
    /// Running spread in bp that accompanies an upfront quote.
    pub running_premium_bp: Option<f64>,
}

impl TrancheQuote {
    pub fn validate(&self, valuation_date: NaiveDate) -> Result<()> {
        if !(0.0..1.0).contains(&self.attachment)
            || !(self.detachment > 0.0 && self.detachment <= 1.0)
            || self.attachment >= self.detachment
        {
            return Err(Error::validation(format!(
                "tranche needs 0 <= A < B <= 1, got A={} B={}",
                self.attachment, self.detachment
            )));
        }
        if !(self.bid_ask_width > 0.0) {
            return Err(Error::validation("bid-ask width must be positive"));
        }
        if self.maturity <= valuation_date {
            return Err(Error::validation(format!(
                "maturity {} is not after valuation date",
                format_date(self.maturity)
            )));
        }
        Ok(())
    }
}

/// Quotes sharing one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityBucket {
    pub maturity: NaiveDate,
    pub index: Option<IndexQuote>,
    pub tranches: Vec<TrancheQuote>,
}

impl MaturityBucket {
    pub fn len(&self) -> usize {
        self.tranches.len() + usize::from(self.index.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index and tranche quotes for one pool, grouped by increasing maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotePanel {
    pub pool: String,
    pub valuation_date: NaiveDate,
    pub buckets: Vec<MaturityBucket>,
}

impl QuotePanel {
    pub fn instrument_count(&self) -> usize {
        self.buckets.iter().map(MaturityBucket::len).sum()
    }

    pub fn maturities(&self) -> Vec<NaiveDate> {
        self.buckets.iter().map(|b| b.maturity).collect()
    }

    /// Payment schedule for every bucket; dates are generated quarterly.
    pub fn schedules(&self) -> Result<Vec<PaymentSchedule>> {
        self.buckets
            .iter()
            .map(|b| PaymentSchedule::quarterly_imm(self.valuation_date, b.maturity))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Writes the panel back in the quotes CSV layout.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(HEADER)?;
        for b in &self.buckets {
            let mat = format_date(b.maturity);
            if let Some(ix) = &b.index {
                w.write_record([
                    self.pool.as_str(),
                    &mat,
                    "",
                    "",
                    &ix.spread_bp.to_string(),
                    &ix.bid_ask_bp.to_string(),
                    "false",
                ])?;
            }
            for t in &b.tranches {
                let (q, width) = if t.is_upfront {
                    (t.quote * BP_PER_UNIT, t.bid_ask_width * BP_PER_UNIT)
                } else {
                    (t.quote, t.bid_ask_width)
                };
                w.write_record([
                    self.pool.as_str(),
                    &mat,
                    &t.attachment.to_string(),
                    &t.detachment.to_string(),
                    &q.to_string(),
                    &width.to_string(),
                    &t.is_upfront.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<quotes csv>", e))?;
        Ok(())
    }
}

const HEADER: [&str; 7] = [
    "pool",
    "maturity",
    "attach",
    "detach",
    "quote_bp",
    "bid_ask_bp",
    "is_upfront",
];

/// Reads a `pool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront` CSV.
/// Index rows leave `attach` and `detach` empty. Attachment points are fractions
/// of pool notional (`0.03`) or percents (`3%`).
pub fn load_quotes<R: Read>(source: R, valuation_date: NaiveDate) -> Result<QuotePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut pool: Option<String> = None;
    let mut buckets: Vec<MaturityBucket> = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let r = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if r.len() < 7 {
            return Err(Error::parse(line, "expected 7 columns"));
        }
        match &pool {
            None => pool = Some(r[0].to_string()),
            Some(p) if p != &r[0] => {
                return Err(Error::parse(
                    line,
                    format!("mixed pools `{p}` and `{}`", &r[0]),
                ))
            }
            _ => {}
        }
        let maturity = parse_date(&r[1])
            .ok_or_else(|| Error::parse(line, format!("bad maturity `{}`", &r[1])))?;
        let quote = parse_number(&r[4], line, "quote_bp")?;
        if r[5].is_empty() {
            return Err(Error::parse(line, "missing bid_ask_bp"));
        }
        let width = parse_number(&r[5], line, "bid_ask_bp")?;
        let is_upfront = parse_bool(&r[6], line)?;

        let bucket_pos = match buckets.iter().position(|b| b.maturity == maturity) {
            Some(p) => p,
            None => {
                buckets.push(MaturityBucket {
                    maturity,
                    index: None,
                    tranches: Vec::new(),
                });
                buckets.len() - 1
            }
        };
        let bucket = &mut buckets[bucket_pos];

        if r[2].is_empty() && r[3].is_empty() {
            if is_upfront {
                return Err(Error::parse(line, "index quotes cannot be upfront"));
            }
            if !(quote > 0.0) {
                return Err(Error::validation(format!(
                    "line {line}: index spread must be positive"
                )));
            }
            if !(width > 0.0) {
                return Err(Error::validation(format!(
                    "line {line}: bid-ask width must be positive"
                )));
            }
            if bucket.index.is_some() {
                return Err(Error::parse(line, "duplicate index quote for maturity"));
            }
            bucket.index = Some(IndexQuote {
                maturity,
                spread_bp: quote,
                bid_ask_bp: width,
            });
            continue;
        }

        let attachment = parse_fraction(&r[2], line, "attach")?;
        let detachment = parse_fraction(&r[3], line, "detach")?;
        let tq = if is_upfront {
            TrancheQuote {
                attachment,
                detachment,
                maturity,
                quote: quote / BP_PER_UNIT,
                bid_ask_width: width / BP_PER_UNIT,
                is_upfront,
                running_premium_bp: Some(EQUITY_RUNNING_BP),
            }
        } else {
            TrancheQuote {
                attachment,
                detachment,
                maturity,
                quote,
                bid_ask_width: width,
                is_upfront,
                running_premium_bp: None,
            }
        };
        tq.validate(valuation_date)
            .map_err(|e| Error::validation(format!("line {line}: {e}")))?;
        bucket.tranches.push(tq);
    }

    buckets.sort_by_key(|b| b.maturity);
    for b in &mut buckets {
        b.tranches
            .sort_by(|x, y| x.attachment.total_cmp(&y.attachment));
        if b.maturity <= valuation_date {
            return Err(Error::validation(format!(
                "maturity {} is not after valuation date",
                format_date(b.maturity)
            )));
        }
    }
    Ok(QuotePanel {
        pool: pool.unwrap_or_default(),
        valuation_date,
        buckets,
    })
}

fn parse_number(raw: &str, line: usize, column: &str) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("bad {column} `{raw}`")))
}

fn parse_fraction(raw: &str, line: usize, column: &str) -> Result<f64> {
    match raw.strip_suffix('%') {
        Some(p) => parse_number(p.trim(), line, column).map(|x| x / 100.0),
        None => parse_number(raw, line, column),
    }
}

fn parse_bool(raw: &str, line: usize) -> Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "y" => Ok(true),
        "false" | "0" | "no" | "n" | "" => Ok(false),
        _ => Err(Error::parse(line, format!("bad is_upfront `{raw}`"))),
    }
}
