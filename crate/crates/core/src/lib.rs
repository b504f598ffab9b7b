//! Bounds on the probability of causation for an individual case, from
//! randomized experimental data with or without an observed mediator.
//!
//! The probability of causation is `P(Y(0) = 0 | X = 1, Y(1) = 1)`: given
//! that an exposed individual developed the outcome, how likely it is that
//! the outcome would not have occurred without exposure. It depends on the
//! joint law of the two potential outcomes, which no experiment reveals, so
//! only an interval can be identified.
//!
//! * [`simple`]: exposure and outcome only.
//! * [`mediation`]: complete and partial mediation, plus comparison.
//! * [`oracle`]: brute-force checks over joint potential-outcome laws.
//! * [`estimate`]: margins from count tables and record files.
//! * [`cli`]: the `pcbounds` command.

pub mod cli;
pub mod error;
pub mod estimate;
pub mod mediation;
pub mod oracle;
pub mod probability;
pub mod simple;

pub use error::{BoundsError, Result};
pub use mediation::{
    compare, complete_bounds, complete_numerator, partial_bounds, partial_upper_numerator,
    ComparisonReport, CompleteMediationMargins, PartialMediationMargins,
};
pub use probability::{
    interval, prob_from_counts, BoundInterval, CountTable, Probability, REPORT_TOL, STRUCT_TOL,
};
pub use simple::{risk_ratio, simple_bounds, RiskRatio, SimpleMargins};
