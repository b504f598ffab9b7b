//! Validated probabilities, bound intervals and 2x2 count tables.

use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{BoundsError, Result};

/// Tolerance for exact structural identities (margin consistency, normalization).
pub const STRUCT_TOL: f64 = 1e-9;

/// Tolerance for matching values reported to two decimals.
pub const REPORT_TOL: f64 = 0.005;

/// Width of the window outside `[0, 1]` that is silently clamped.
pub const CLAMP_TOL: f64 = 1e-12;

/// Rounds to 12 significant digits, the precision used in every JSON report.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// A real number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Deserialize)]
#[serde(try_from = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    /// Strict constructor: anything outside `[0, 1]` (or NaN) is rejected.
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(BoundsError::InvalidInput(format!(
                "{value} is not a probability"
            )))
        }
    }

    /// Accepts values up to `CLAMP_TOL` outside the unit interval and clamps
    /// them; used for the results of floating point arithmetic.
    pub fn clamped(value: f64) -> Result<Self> {
        if (-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&value) {
            Ok(Probability(value.clamp(0.0, 1.0)))
        } else {
            Err(BoundsError::InvalidInput(format!(
                "{value} is outside [0, 1] beyond tolerance {CLAMP_TOL}"
            )))
        }
    }

    /// Clamps into `[0, 1]` unconditionally. Only for quantities that are
    /// ratios known to be nonnegative, where exceeding 1 is meaningful
    /// information that the caller deliberately discards.
    pub(crate) fn saturating(value: f64) -> Self {
        debug_assert!(!value.is_nan());
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }

    #[inline]
    pub fn min(self, other: Self) -> Self {
        if other.0 < self.0 {
            other
        } else {
            self
        }
    }

    #[inline]
    pub fn max(self, other: Self) -> Self {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl std::ops::Mul for Probability {
    type Output = Probability;

    fn mul(self, rhs: Probability) -> Probability {
        Probability(self.0 * rhs.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = BoundsError;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl Serialize for Probability {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(round_sig12(self.0))
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "{:.*}", p, self.0),
            None => write!(f, "{}", self.0),
        }
    }
}

/// Closed interval `[lower, upper]` inside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct BoundInterval {
    lower: Probability,
    upper: Probability,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInterval {
    lower: Probability,
    upper: Probability,
}

impl TryFrom<RawInterval> for BoundInterval {
    type Error = BoundsError;

    fn try_from(raw: RawInterval) -> Result<Self> {
        interval(raw.lower, raw.upper)
    }
}

/// Builds an interval, absorbing an inversion of at most `CLAMP_TOL`.
pub fn interval(lower: Probability, upper: Probability) -> Result<BoundInterval> {
    if lower.0 <= upper.0 {
        Ok(BoundInterval { lower, upper })
    } else if lower.0 - upper.0 <= CLAMP_TOL {
        Ok(BoundInterval {
            lower: upper,
            upper,
        })
    } else {
        Err(BoundsError::InconsistentBounds {
            lower: lower.0,
            upper: upper.0,
        })
    }
}

impl BoundInterval {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        interval(Probability::clamped(lower)?, Probability::clamped(upper)?)
    }

    pub fn lower(&self) -> Probability {
        self.lower
    }

    pub fn upper(&self) -> Probability {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper.0 - self.lower.0
    }

    pub fn contains(&self, x: f64, tol: f64) -> bool {
        x >= self.lower.0 - tol && x <= self.upper.0 + tol
    }

    /// Intersection of two identified sets; fails if they are disjoint.
    pub fn intersect(&self, other: &BoundInterval) -> Result<BoundInterval> {
        interval(self.lower.max(other.lower), self.upper.min(other.upper))
    }
}

impl fmt::Display for BoundInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match f.precision() {
            Some(p) => write!(f, "[{:.*}, {:.*}]", p, self.lower.0, p, self.upper.0),
            None => write!(f, "[{}, {}]", self.lower.0, self.upper.0),
        }
    }
}

/// Outcome counts in the two arms of a randomized experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCountTable")]
pub struct CountTable {
    pub exposed_event: u64,
    pub exposed_total: u64,
    pub unexposed_event: u64,
    pub unexposed_total: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCountTable {
    exposed_event: u64,
    exposed_total: u64,
    unexposed_event: u64,
    unexposed_total: u64,
}

impl TryFrom<RawCountTable> for CountTable {
    type Error = BoundsError;

    fn try_from(raw: RawCountTable) -> Result<Self> {
        CountTable::new(
            raw.exposed_event,
            raw.exposed_total,
            raw.unexposed_event,
            raw.unexposed_total,
        )
    }
}

impl CountTable {
    pub fn new(
        exposed_event: u64,
        exposed_total: u64,
        unexposed_event: u64,
        unexposed_total: u64,
    ) -> Result<Self> {
        check_counts(exposed_event, exposed_total, "exposed")?;
        check_counts(unexposed_event, unexposed_total, "unexposed")?;
        Ok(CountTable {
            exposed_event,
            exposed_total,
            unexposed_event,
            unexposed_total,
        })
    }
}

fn check_counts(events: u64, total: u64, arm: &str) -> Result<()> {
    if total == 0 {
        return Err(BoundsError::InvalidInput(format!("{arm} total is zero")));
    }
    if events > total {
        return Err(BoundsError::InvalidInput(format!(
            "{arm} events {events} exceed total {total}"
        )));
    }
    Ok(())
}

/// Empirical rate `events / total`.
pub fn prob_from_counts(events: u64, total: u64) -> Result<Probability> {
    check_counts(events, total, "count")?;
    Probability::new(events as f64 / total as f64)
}
