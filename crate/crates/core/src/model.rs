use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which counting-process construction an intensity schedule parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Capped generalized Poisson loss: `min(sum_j alpha_j Z_j, M)`.
    Gpl,
    /// Cluster-adjusted construction: a cluster fires only if none of its names has defaulted.
    Gpcl,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gpl => "gpl",
            ModelKind::Gpcl => "gpcl",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gpl" => Ok(ModelKind::Gpl),
            "gpcl" => Ok(ModelKind::Gpcl),
            other => Err(Error::validation(format!("unknown model `{other}`"))),
        }
    }
}

/// How repeated cluster shocks are turned into a bounded default count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Every shock counts; the count is unbounded.
    Repeated,
    /// Count capped at the pool size.
    S0,
    /// Each name defaults at most once; clusters may fire partially.
    S1,
    /// A cluster fires only if none of its names has defaulted.
    S2,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Repeated,
        Strategy::S0,
        Strategy::S1,
        Strategy::S2,
    ];

    /// Strategies that keep track of which names defaulted.
    pub fn preserves_names(self) -> bool {
        matches!(self, Strategy::S1 | Strategy::S2)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Repeated => "repeated",
            Strategy::S0 => "s0",
            Strategy::S1 => "s1",
            Strategy::S2 => "s2",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "repeated" => Ok(Strategy::Repeated),
            "s0" | "0" | "gpl" => Ok(Strategy::S0),
            "s1" | "1" => Ok(Strategy::S1),
            "s2" | "2" | "gpcl" => Ok(Strategy::S2),
            other => Err(Error::validation(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Pool of `size` names with unit total notional and constant recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub size: usize,
    pub recovery: f64,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self {
            size: 125,
            recovery: 0.40,
        }
    }
}

impl PoolSpec {
    pub fn new(size: usize, recovery: f64) -> Result<Self> {
        let pool = Self { size, recovery };
        pool.validate()?;
        Ok(pool)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::validation("pool needs at least one name"));
        }
        if !(0.0..=1.0).contains(&self.recovery) {
            return Err(Error::validation(format!(
                "recovery {} outside [0, 1]",
                self.recovery
            )));
        }
        Ok(())
    }

    /// Pool loss fraction after `count` defaults.
    pub fn loss_fraction(&self, count: usize) -> f64 {
        (1.0 - self.recovery) * count as f64 / self.size as f64
    }
}
