//! Bounds from exposure and outcome data alone.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::probability::{interval, BoundInterval, Probability};

/// Interventional outcome rates of a randomized experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimpleMargins {
    /// `P(Y = 1 | X <- 1)`
    pub p1: Probability,
    /// `P(Y = 1 | X <- 0)`
    pub p0: Probability,
}

impl SimpleMargins {
    pub fn new(p1: f64, p0: f64) -> Result<Self> {
        Ok(SimpleMargins {
            p1: Probability::new(p1)?,
            p0: Probability::new(p0)?,
        })
    }
}

/// Experimental risk ratio `p1 / p0`, which may be infinite or undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiskRatio {
    Finite(f64),
    Infinite,
    /// Both rates are zero.
    Undefined,
}

impl RiskRatio {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            RiskRatio::Finite(r) => Some(r),
            RiskRatio::Infinite => Some(f64::INFINITY),
            RiskRatio::Undefined => None,
        }
    }
}

impl fmt::Display for RiskRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskRatio::Finite(r) => write!(f, "{r:.4}"),
            RiskRatio::Infinite => f.write_str("inf"),
            RiskRatio::Undefined => f.write_str("undefined"),
        }
    }
}

pub fn risk_ratio(m: &SimpleMargins) -> RiskRatio {
    let (p1, p0) = (m.p1.value(), m.p0.value());
    if p0 > 0.0 {
        RiskRatio::Finite(p1 / p0)
    } else if p1 > 0.0 {
        RiskRatio::Infinite
    } else {
        RiskRatio::Undefined
    }
}

/// Upper Fréchet bound on `P(Y(0) = 0, Y(1) = 1)`: `min{1 - p0, p1}`.
pub fn simple_numerator(m: &SimpleMargins) -> Probability {
    m.p0.complement().min(m.p1)
}

pub(crate) fn require_positive_p1(p1: Probability, what: &str) -> Result<()> {
    if p1.value() > 0.0 {
        Ok(())
    } else {
        Err(BoundsError::PcUndefined(format!(
            "P(Y(1)=1) = 0 {what}; the conditioning event is impossible"
        )))
    }
}

/// Lower bound `max{0, 1 - 1/RR}`, shared by every evidence regime.
pub(crate) fn lower_bound(m: &SimpleMargins) -> Probability {
    Probability::saturating(1.0 - m.p0.value() / m.p1.value())
}

/// `[max{0, 1 - 1/RR}, min{1 - p0, p1} / p1]`.
pub fn simple_bounds(m: &SimpleMargins) -> Result<BoundInterval> {
    require_positive_p1(m.p1, "in the simple margins")?;
    let upper = Probability::saturating(simple_numerator(m).value() / m.p1.value());
    interval(lower_bound(m), upper)
}
