use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_engine::LossDistribution;
use crate::model::PoolSpec;

/// Slice `[A, B]` of the pool loss, as fractions of pool notional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrancheDef {
    pub attachment: f64,
    pub detachment: f64,
}

impl TrancheDef {
    pub fn new(attachment: f64, detachment: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&attachment) || !(attachment < detachment && detachment <= 1.0) {
            return Err(Error::validation(format!(
                "tranche needs 0 <= A < B <= 1, got [{attachment}, {detachment}]"
            )));
        }
        Ok(Self {
            attachment,
            detachment,
        })
    }

    /// The whole pool: tranched loss equals pool loss.
    pub fn whole_pool() -> Self {
        Self {
            attachment: 0.0,
            detachment: 1.0,
        }
    }

    pub fn thickness(&self) -> f64 {
        self.detachment - self.attachment
    }

    pub fn label(&self) -> String {
        format!(
            "{}-{}%",
            trim_pct(self.attachment * 100.0),
            trim_pct(self.detachment * 100.0)
        )
    }
}

fn trim_pct(x: f64) -> String {
    let r = (x * 1000.0).round() / 1000.0;
    format!("{r}")
}

fn clip(l: f64, tranche: &TrancheDef) -> f64 {
    ((l - tranche.attachment) / tranche.thickness()).clamp(0.0, 1.0)
}

/// Loss of the tranche per unit of its notional when the pool loss is `l`.
pub fn tranched_loss(l: f64, tranche: &TrancheDef) -> Result<f64> {
    if !(0.0..=1.0).contains(&l) {
        return Err(Error::domain(format!("pool loss {l} outside [0, 1]")));
    }
    Ok(clip(l, tranche))
}

/// `E[tranched loss]` under the constant-recovery map `L = (1 - R) C / M`.
pub fn expected_tranched_loss(dist: &LossDistribution, tranche: &TrancheDef, pool: &PoolSpec) -> f64 {
    dist.expectation(|c| clip(pool.loss_fraction(c), tranche))
}
