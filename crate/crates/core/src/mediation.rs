//! Bounds on the probability of causation when a mediator `M` is observed
//! in the experimental data.
//!
//! Two mechanisms are supported. Under *complete* mediation the exposure acts
//! on the outcome only through `M`, so `Y(x) = Y*(M(x))`. Under *partial*
//! mediation a direct path remains and `Y(x) = Y*(x, M(x))`. In both cases
//! the lower bound is the same as without the mediator; only the upper bound
//! changes.

use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::probability::{interval, BoundInterval, Probability, STRUCT_TOL};
use crate::simple::{lower_bound, require_positive_p1, simple_bounds, SimpleMargins};

/// Margins for complete mediation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompleteMediationMargins {
    /// `P(M(0) = 0)`
    pub a: Probability,
    /// `P(M(1) = 1)`
    pub b: Probability,
    /// `P(Y*(0) = 0)`
    pub c: Probability,
    /// `P(Y*(1) = 1)`
    pub d: Probability,
}

impl CompleteMediationMargins {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Ok(CompleteMediationMargins {
            a: Probability::new(a)?,
            b: Probability::new(b)?,
            c: Probability::new(c)?,
            d: Probability::new(d)?,
        })
    }
}

/// Margins for partial mediation. Every field is the probability of the
/// value 1; `y{x}{m}` is `P(Y*(x, m) = 1)` and `m{x}` is `P(M(x) = 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialMediationMargins {
    pub y00: Probability,
    pub y01: Probability,
    pub y10: Probability,
    pub y11: Probability,
    pub m0: Probability,
    pub m1: Probability,
}

impl PartialMediationMargins {
    pub fn new(y00: f64, y01: f64, y10: f64, y11: f64, m0: f64, m1: f64) -> Result<Self> {
        Ok(PartialMediationMargins {
            y00: Probability::new(y00)?,
            y01: Probability::new(y01)?,
            y10: Probability::new(y10)?,
            y11: Probability::new(y11)?,
            m0: Probability::new(m0)?,
            m1: Probability::new(m1)?,
        })
    }

    /// `P(Y*(x, m) = 1)`.
    pub fn outcome(&self, x: usize, m: usize) -> Probability {
        match (x, m) {
            (0, 0) => self.y00,
            (0, 1) => self.y01,
            (1, 0) => self.y10,
            (1, 1) => self.y11,
            _ => panic!("binary index out of range: ({x}, {m})"),
        }
    }

    /// `P(M(x) = 1)`.
    pub fn mediator(&self, x: usize) -> Probability {
        match x {
            0 => self.m0,
            1 => self.m1,
            _ => panic!("binary index out of range: {x}"),
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.y00.value(),
            self.y01.value(),
            self.y10.value(),
            self.y11.value(),
            self.m0.value(),
            self.m1.value(),
        ]
    }
}

/// Partial-mediation margins as usually tabulated: probabilities of the
/// value 0. Converted explicitly so complements never get mixed up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroValueListing {
    pub y00_is_zero: f64,
    pub y01_is_zero: f64,
    pub y10_is_zero: f64,
    pub y11_is_zero: f64,
    pub m0_is_zero: f64,
    pub m1_is_zero: f64,
}

impl TryFrom<ZeroValueListing> for PartialMediationMargins {
    type Error = BoundsError;

    fn try_from(l: ZeroValueListing) -> Result<Self> {
        let one = |q: f64| Probability::new(q).map(Probability::complement);
        Ok(PartialMediationMargins {
            y00: one(l.y00_is_zero)?,
            y01: one(l.y01_is_zero)?,
            y10: one(l.y10_is_zero)?,
            y11: one(l.y11_is_zero)?,
            m0: one(l.m0_is_zero)?,
            m1: one(l.m1_is_zero)?,
        })
    }
}

/// Upper-bound numerator for complete mediation, by the four-way case split on
/// `a` vs `b` and `c` vs `d`. Ties take the `<=` branch.
pub fn complete_numerator(m: &CompleteMediationMargins) -> Probability {
    let (a, b, c, d) = (m.a.value(), m.b.value(), m.c.value(), m.d.value());
    let value = match (a <= b, c <= d) {
        (true, true) => a * c + (1.0 - d) * (1.0 - b),
        (false, true) => b * c + (1.0 - d) * (1.0 - a),
        (true, false) => a * d + (1.0 - c) * (1.0 - b),
        (false, false) => b * d + (1.0 - a) * (1.0 - c),
    };
    Probability::saturating(value)
}

/// Rates implied by the Markov chain `X -> M -> Y`.
pub fn derive_simple_from_complete(m: &CompleteMediationMargins) -> SimpleMargins {
    let (a, b, c, d) = (m.a.value(), m.b.value(), m.c.value(), m.d.value());
    SimpleMargins {
        p1: Probability::saturating(b * d + (1.0 - b) * (1.0 - c)),
        p0: Probability::saturating((1.0 - a) * d + a * (1.0 - c)),
    }
}

pub fn complete_bounds(m: &CompleteMediationMargins) -> Result<BoundInterval> {
    let simple = derive_simple_from_complete(m);
    require_positive_p1(simple.p1, "under the complete-mediation margins")?;
    let upper = Probability::saturating(complete_numerator(m).value() / simple.p1.value());
    interval(lower_bound(&simple), upper)
}

/// `P(Y(x) = 1) = sum_m P(Y*(x, m) = 1) P(M(x) = m)`.
pub fn derive_simple_from_partial(m: &PartialMediationMargins) -> SimpleMargins {
    let rate = |x: usize| {
        let mx = m.mediator(x).value();
        m.outcome(x, 0).value() * (1.0 - mx) + m.outcome(x, 1).value() * mx
    };
    SimpleMargins {
        p1: Probability::saturating(rate(1)),
        p0: Probability::saturating(rate(0)),
    }
}

/// The four summands of the partial-mediation numerator, indexed by
/// `(m0, m1)` in the order `(0,0), (0,1), (1,0), (1,1)`. Each is
/// `min{P(Y*(0,m0)=0), P(Y*(1,m1)=1)} * min{P(M(0)=m0), P(M(1)=m1)}`.
pub fn partial_terms(m: &PartialMediationMargins) -> [Probability; 4] {
    let mediator_is = |x: usize, v: usize| {
        let p = m.mediator(x);
        if v == 1 {
            p
        } else {
            p.complement()
        }
    };
    let term = |m0: usize, m1: usize| {
        let outcome = m.outcome(0, m0).complement().min(m.outcome(1, m1));
        let mediator = mediator_is(0, m0).min(mediator_is(1, m1));
        outcome * mediator
    };
    [term(0, 0), term(0, 1), term(1, 0), term(1, 1)]
}

pub fn partial_upper_numerator(m: &PartialMediationMargins) -> Probability {
    let total: f64 = partial_terms(m).iter().map(|t| t.value()).sum();
    Probability::saturating(total)
}

/// The lower bound is the simple one; the upper bound divides the
/// four-term numerator by `P(Y(1) = 1)` and caps at 1.
pub fn partial_bounds(m: &PartialMediationMargins) -> Result<BoundInterval> {
    let simple = derive_simple_from_partial(m);
    require_positive_p1(simple.p1, "under the partial-mediation margins")?;
    let upper = Probability::saturating(partial_upper_numerator(m).value() / simple.p1.value());
    interval(lower_bound(&simple), upper)
}

/// The simple numerator `min{1 - p0, p1}` rewritten through the mediator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    /// `P(Y*(0,0)=0) P(M(0)=0)`
    pub alpha: Probability,
    /// `P(Y*(0,1)=0) P(M(0)=1)`
    pub beta: Probability,
    /// `P(Y*(1,0)=1) P(M(1)=0)`
    pub gamma: Probability,
    /// `P(Y*(1,1)=1) P(M(1)=1)`
    pub delta: Probability,
    /// `min{alpha + beta, gamma + delta}`
    pub numerator: Probability,
}

pub fn simple_numerator_via_decomposition(m: &PartialMediationMargins) -> Decomposition {
    let alpha = m.y00.complement() * m.m0.complement();
    let beta = m.y01.complement() * m.m0;
    let gamma = m.y10 * m.m1.complement();
    let delta = m.y11 * m.m1;
    let numerator =
        Probability::saturating((alpha.value() + beta.value()).min(gamma.value() + delta.value()));
    Decomposition {
        alpha,
        beta,
        gamma,
        delta,
        numerator,
    }
}

/// Collapses partial margins to the complete-mediation form, which requires
/// `Y*(0, m) = Y*(1, m)` in distribution for both `m`.
pub fn collapse_to_complete(
    m: &PartialMediationMargins,
    tol: f64,
) -> Result<CompleteMediationMargins> {
    for med in 0..2 {
        let gap = (m.outcome(0, med).value() - m.outcome(1, med).value()).abs();
        if gap > tol {
            return Err(BoundsError::AssumptionViolation(format!(
                "complete mediation requires P(Y*(0,{med})=1) = P(Y*(1,{med})=1), \
                 but they differ by {gap:.3e} (tolerance {tol:.1e})"
            )));
        }
    }
    Ok(CompleteMediationMargins {
        a: m.m0.complement(),
        b: m.m1,
        c: m.y00.complement(),
        d: m.y11,
    })
}

/// Which regime produced the tightest upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TightestUpper {
    Simple,
    Partial,
    Complete,
}

/// Side-by-side bounds from ignoring and using the mediator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub simple_interval: BoundInterval,
    pub partial_interval: BoundInterval,
    pub complete_interval: Option<BoundInterval>,
    pub combined_interval: BoundInterval,
    pub alpha: Probability,
    pub beta: Probability,
    pub gamma: Probability,
    pub delta: Probability,
    pub numerator_simple: Probability,
    pub numerator_partial: Probability,
    pub tightest_upper: TightestUpper,
}

pub fn compare(m: &PartialMediationMargins, complete_claim: bool) -> Result<ComparisonReport> {
    compare_with_tolerance(m, complete_claim, STRUCT_TOL)
}

/// As [`compare`], with an explicit tolerance for the complete-mediation
/// equality check (looser when the margins are estimated from data).
pub fn compare_with_tolerance(
    m: &PartialMediationMargins,
    complete_claim: bool,
    claim_tol: f64,
) -> Result<ComparisonReport> {
    let simple_interval = simple_bounds(&derive_simple_from_partial(m))?;
    let partial_interval = partial_bounds(m)?;
    let complete_interval = if complete_claim {
        Some(complete_bounds(&collapse_to_complete(m, claim_tol)?)?)
    } else {
        None
    };

    let mut combined_interval = simple_interval.intersect(&partial_interval)?;
    let mut tightest_upper = if partial_interval.upper() < simple_interval.upper() {
        TightestUpper::Partial
    } else {
        TightestUpper::Simple
    };
    if let Some(c) = &complete_interval {
        if c.upper() < combined_interval.upper() {
            tightest_upper = TightestUpper::Complete;
        }
        combined_interval = combined_interval.intersect(c)?;
    }

    let dec = simple_numerator_via_decomposition(m);
    let numerator_partial = partial_upper_numerator(m);
    if numerator_partial.value() > 2.0 * dec.numerator.value() + STRUCT_TOL {
        return Err(BoundsError::InconsistentBounds {
            lower: numerator_partial.value(),
            upper: 2.0 * dec.numerator.value(),
        });
    }

    Ok(ComparisonReport {
        simple_interval,
        partial_interval,
        complete_interval,
        combined_interval,
        alpha: dec.alpha,
        beta: dec.beta,
        gamma: dec.gamma,
        delta: dec.delta,
        numerator_simple: dec.numerator,
        numerator_partial,
        tightest_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_example() -> PartialMediationMargins {
        ZeroValueListing {
            y00_is_zero: 0.98,
            y01_is_zero: 0.165,
            y10_is_zero: 0.315,
            y11_is_zero: 0.143,
            m0_is_zero: 0.73,
            m1_is_zero: 0.981,
        }
        .try_into()
        .unwrap()
    }

    fn second_example() -> PartialMediationMargins {
        ZeroValueListing {
            y00_is_zero: 0.98,
            y01_is_zero: 0.67,
            y10_is_zero: 0.09,
            y11_is_zero: 0.27,
            m0_is_zero: 0.04,
            m1_is_zero: 0.26,
        }
        .try_into()
        .unwrap()
    }

    #[test]
    fn listing_conversion_takes_complements() {
        let m = first_example();
        assert!((m.y00.value() - 0.02).abs() < 1e-15);
        assert!((m.y01.value() - 0.835).abs() < 1e-15);
        assert!((m.m1.value() - 0.019).abs() < 1e-15);
    }

    // Brute-force maximum of P(Y(0)=0, Y(1)=1) under complete mediation:
    // sweep the free cell of the (M(0), M(1)) coupling and of the
    // (Y*(0), Y*(1)) coupling, each over its feasible range.
    fn nested_sweep_max(a: f64, b: f64, c: f64, d: f64, steps: usize) -> f64 {
        let range = |p: f64, q: f64| ((p + q - 1.0).max(0.0), p.min(q));
        let (s_lo, s_hi) = range(a, b);
        let (t_lo, t_hi) = range(c, d);
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            // s = P(M(0)=0, M(1)=1)
            let s = s_lo + (s_hi - s_lo) * i as f64 / steps as f64;
            let flip_down = (1.0 - b) - (a - s);
            for j in 0..=steps {
                // t = P(Y*(0)=0, Y*(1)=1)
                let t = t_lo + (t_hi - t_lo) * j as f64 / steps as f64;
                let rev = (1.0 - c) - (d - t);
                best = best.max(s * t + flip_down * rev);
            }
        }
        best
    }

    #[test]
    fn complete_numerator_examples() {
        let n = |a, b, c, d| {
            complete_numerator(&CompleteMediationMargins::new(a, b, c, d).unwrap()).value()
        };
        assert_eq!(n(1.0, 1.0, 1.0, 1.0), 1.0);
        assert_eq!(n(0.5, 0.5, 0.5, 0.5), 0.5);
        let v = n(0.7, 0.6, 0.4, 0.9);
        assert!((v - 0.27).abs() < 1e-12);
        assert!((nested_sweep_max(0.7, 0.6, 0.4, 0.9, 50) - 0.27).abs() < 1e-12);
    }

    #[test]
    fn complete_numerator_matches_nested_sweep_on_grid() {
        let grid: Vec<f64> = (0..=5).map(|i| i as f64 * 0.2).collect();
        for &a in &grid {
            for &b in &grid {
                for &c in &grid {
                    for &d in &grid {
                        let m = CompleteMediationMargins::new(a, b, c, d).unwrap();
                        let oracle = nested_sweep_max(a, b, c, d, 20);
                        assert!(
                            (complete_numerator(&m).value() - oracle).abs() < 1e-9,
                            "{a} {b} {c} {d}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn case_split_branches_agree_at_ties() {
        let formulas = |a: f64, b: f64, c: f64, d: f64| {
            [
                a * c + (1.0 - d) * (1.0 - b),
                b * c + (1.0 - d) * (1.0 - a),
                a * d + (1.0 - c) * (1.0 - b),
                b * d + (1.0 - a) * (1.0 - c),
            ]
        };
        for &(x, y) in &[(0.3, 0.8), (0.55, 0.2), (0.0, 1.0)] {
            // a = b: columns coincide
            let f = formulas(x, x, x, y);
            assert!((f[0] - f[1]).abs() < 1e-15 && (f[2] - f[3]).abs() < 1e-15);
            // c = d: rows coincide
            let f = formulas(x, y, y, y);
            assert!((f[0] - f[2]).abs() < 1e-15 && (f[1] - f[3]).abs() < 1e-15);
        }
    }

    #[test]
    fn complete_bounds_examples() {
        let b =
            complete_bounds(&CompleteMediationMargins::new(1.0, 1.0, 1.0, 1.0).unwrap()).unwrap();
        assert_eq!((b.lower().value(), b.upper().value()), (1.0, 1.0));
        let b =
            complete_bounds(&CompleteMediationMargins::new(0.5, 0.5, 0.5, 0.5).unwrap()).unwrap();
        assert_eq!((b.lower().value(), b.upper().value()), (0.0, 1.0));
    }

    #[test]
    fn complete_bounds_upper_is_sweep_max_over_p1() {
        let (a, b, c, d) = (0.73, 0.019, 0.98, 0.857);
        let m = CompleteMediationMargins::new(a, b, c, d).unwrap();
        let p1 = derive_simple_from_complete(&m).p1.value();
        let bounds = complete_bounds(&m).unwrap();
        let oracle = nested_sweep_max(a, b, c, d, 200) / p1;
        assert!((bounds.upper().value() - oracle.min(1.0)).abs() < 1e-6);
    }

    #[test]
    fn complete_bounds_zero_p1() {
        let m = CompleteMediationMargins::new(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            complete_bounds(&m),
            Err(BoundsError::PcUndefined(_))
        ));
    }

    #[test]
    fn derive_from_complete() {
        let s = derive_simple_from_complete(
            &CompleteMediationMargins::new(1.0, 0.0, 1.0, 1.0).unwrap(),
        );
        assert_eq!((s.p1.value(), s.p0.value()), (0.0, 0.0));
        let s = derive_simple_from_complete(
            &CompleteMediationMargins::new(0.5, 0.5, 0.5, 0.5).unwrap(),
        );
        assert_eq!((s.p1.value(), s.p0.value()), (0.5, 0.5));

        // Enumerate the (M(x), Y*(m)) cells under independence.
        let (a, b, c, d) = (0.7, 0.6, 0.4, 0.9);
        let m_one = [1.0 - a, b]; // P(M(x)=1)
        let y_one = [1.0 - c, d]; // P(Y*(m)=1)
        let mut rates = [0.0; 2];
        for x in 0..2 {
            for (med, y) in y_one.iter().enumerate() {
                let pm = if med == 1 { m_one[x] } else { 1.0 - m_one[x] };
                rates[x] += pm * y;
            }
        }
        let s = derive_simple_from_complete(&CompleteMediationMargins::new(a, b, c, d).unwrap());
        assert!((s.p1.value() - rates[1]).abs() < 1e-12);
        assert!((s.p0.value() - rates[0]).abs() < 1e-12);
        assert!((rates[1] - 0.78).abs() < 1e-12 && (rates[0] - 0.69).abs() < 1e-12);
    }

    #[test]
    fn partial_numerator_examples() {
        assert!((partial_upper_numerator(&first_example()).value() - 0.564).abs() < 1e-3);
        assert!((partial_upper_numerator(&second_example()).value() - 0.7356).abs() < 1e-4);
        let zero = PartialMediationMargins::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(partial_upper_numerator(&zero).value(), 0.0);
    }

    #[test]
    fn partial_bounds_examples() {
        let b = partial_bounds(&second_example()).unwrap();
        assert!((b.lower().value() - 0.59).abs() < 0.005);
        assert!((b.upper().value() - 0.95).abs() < 0.005);

        let b = partial_bounds(&first_example()).unwrap();
        assert!((b.lower().value() - 0.65).abs() < 0.005);
        // Exact value of the four-term bound for these margins.
        assert!((b.upper().value() - 0.564018 / 0.688268).abs() < 1e-9);

        for &(m0, m1) in &[(0.0, 0.0), (0.3, 0.9), (1.0, 0.2)] {
            let m = PartialMediationMargins::new(0.0, 0.0, 1.0, 1.0, m0, m1).unwrap();
            let b = partial_bounds(&m).unwrap();
            assert_eq!((b.lower().value(), b.upper().value()), (1.0, 1.0));
        }
    }

    #[test]
    fn partial_bounds_zero_p1() {
        let m = PartialMediationMargins::new(0.5, 0.5, 0.0, 0.0, 0.5, 0.5).unwrap();
        assert!(matches!(
            partial_bounds(&m),
            Err(BoundsError::PcUndefined(_))
        ));
    }

    #[test]
    fn derived_rates_match_counts() {
        let s = derive_simple_from_partial(&first_example());
        assert!((s.p1.value() - 0.69).abs() < 0.005 && (s.p0.value() - 0.24).abs() < 0.005);
        let s = derive_simple_from_partial(&second_example());
        assert!((s.p1.value() - 0.78).abs() < 0.005 && (s.p0.value() - 0.32).abs() < 0.005);
        let m = PartialMediationMargins::new(0.37, 0.37, 0.37, 0.37, 0.1, 0.8).unwrap();
        let s = derive_simple_from_partial(&m);
        assert!((s.p1.value() - 0.37).abs() < 1e-15 && (s.p0.value() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let d = simple_numerator_via_decomposition(&first_example());
        let s = derive_simple_from_partial(&first_example());
        assert!((d.alpha.value() + d.beta.value() - s.p0.complement().value()).abs() < 1e-12);
        assert!((d.gamma.value() + d.delta.value() - s.p1.value()).abs() < 1e-12);
        assert!((d.alpha.value() + d.beta.value() - 0.76).abs() < 0.005);
        assert!((d.numerator.value() / s.p1.value() - 1.0).abs() < 1e-12);

        let d = simple_numerator_via_decomposition(&second_example());
        let s = derive_simple_from_partial(&second_example());
        assert!((d.numerator.value() - 0.68).abs() < 0.005);
        assert!((d.numerator.value() / s.p1.value() - 0.88).abs() < 0.005);

        let half = PartialMediationMargins::new(0.5, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(
            simple_numerator_via_decomposition(&half).numerator.value(),
            0.5
        );
    }

    #[test]
    fn compare_picks_the_smaller_upper() {
        let r = compare(&first_example(), false).unwrap();
        assert_eq!(r.tightest_upper, TightestUpper::Partial);
        assert_eq!(r.combined_interval.upper(), r.partial_interval.upper());

        let r = compare(&second_example(), false).unwrap();
        assert_eq!(r.tightest_upper, TightestUpper::Simple);
        assert!((r.combined_interval.lower().value() - 0.59).abs() < 0.005);
        assert!((r.combined_interval.upper().value() - 0.88).abs() < 0.005);
        assert!(r.complete_interval.is_none());
    }

    #[test]
    fn compare_with_complete_claim() {
        let m = PartialMediationMargins::new(0.1, 0.8, 0.1, 0.8, 0.3, 0.7).unwrap();
        let r = compare(&m, true).unwrap();
        let c = r.complete_interval.unwrap();
        assert!(c.upper() <= r.partial_interval.upper());
        assert!(c.upper() <= r.simple_interval.upper());
        assert_eq!(r.combined_interval.upper(), c.upper());
    }

    #[test]
    fn complete_claim_rejected_when_direct_effect_present() {
        assert!(matches!(
            compare(&first_example(), true),
            Err(BoundsError::AssumptionViolation(_))
        ));
        // Within a data-level tolerance it is accepted.
        let m = PartialMediationMargins::new(0.1, 0.8, 0.103, 0.8, 0.3, 0.7).unwrap();
        assert!(compare(&m, true).is_err());
        assert!(compare_with_tolerance(&m, true, 0.005).is_ok());
    }
}
