//! Brute-force verification of the closed-form bounds.
//!
//! A [`PotentialOutcomeLaw`] is a full joint distribution of the six binary
//! potential variables `M(0), M(1), Y*(0,0), Y*(0,1), Y*(1,0), Y*(1,1)`. The
//! mediator pair and the outcome quadruple are independent blocks, which is
//! how the no-confounding assumptions are encoded. From such a law the true
//! probability of causation is computed exactly by enumeration, so any law
//! that matches a set of margins gives a point that every sound bound must
//! contain.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoundsError, Result};
use crate::mediation::{derive_simple_from_partial, partial_bounds, PartialMediationMargins};
use crate::probability::{interval, BoundInterval, Probability, STRUCT_TOL};
use crate::simple::{require_positive_p1, simple_bounds, SimpleMargins};

const IPF_TOL: f64 = 1e-12;
const IPF_MAX_ROUNDS: usize = 10_000;
const MAX_RESAMPLES: usize = 100;

/// Tolerance applied when checking a sampled law against a bound.
pub const SOUNDNESS_TOL: f64 = 1e-9;

/// Independent generator for task `stream` of a run seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Range of `P(A and B)` over all joint laws with the given marginals.
pub fn frechet(pa: Probability, pb: Probability) -> BoundInterval {
    let lower = Probability::saturating(pa.value() + pb.value() - 1.0);
    interval(lower, pa.min(pb)).expect("Fréchet lower never exceeds upper")
}

/// Joint law of two binary events; `p10` is `P(A, not B)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling2 {
    pub p11: Probability,
    pub p10: Probability,
    pub p01: Probability,
    pub p00: Probability,
}

impl Coupling2 {
    /// The coupling with `P(A and B) = joint`; fails if any cell would be
    /// negative.
    pub fn from_intersection(pa: Probability, pb: Probability, joint: f64) -> Result<Self> {
        let (a, b) = (pa.value(), pb.value());
        let cell = |v: f64| {
            Probability::clamped(v).map_err(|_| {
                BoundsError::InvalidInput(format!(
                    "P(A and B) = {joint} is infeasible for P(A) = {a}, P(B) = {b}"
                ))
            })
        };
        Ok(Coupling2 {
            p11: cell(joint)?,
            p10: cell(a - joint)?,
            p01: cell(b - joint)?,
            p00: cell(1.0 - a - b + joint)?,
        })
    }

    /// Maximal overlap.
    pub fn comonotone(pa: Probability, pb: Probability) -> Self {
        Self::from_intersection(pa, pb, pa.min(pb).value())
            .expect("comonotone coupling is feasible")
    }

    /// Minimal overlap.
    pub fn antitone(pa: Probability, pb: Probability) -> Self {
        let joint = (pa.value() + pb.value() - 1.0).max(0.0);
        Self::from_intersection(pa, pb, joint).expect("antitone coupling is feasible")
    }

    pub fn total(&self) -> f64 {
        self.p11.value() + self.p10.value() + self.p01.value() + self.p00.value()
    }

    pub fn margin_a(&self) -> f64 {
        self.p11.value() + self.p10.value()
    }

    pub fn margin_b(&self) -> f64 {
        self.p11.value() + self.p01.value()
    }
}

/// Range of `P(Y(0)=0, Y(1)=1) / P(Y(1)=1)` found by scanning the free cell
/// of the `(Y(0), Y(1))` coupling.
///
/// Candidates are a uniform grid on `[0, 1]` together with the four points
/// at which some cell of the 2x2 table vanishes; a candidate is kept when
/// every cell is nonnegative.
pub fn coupling_sweep_simple(m: &SimpleMargins, steps: usize) -> Result<BoundInterval> {
    require_positive_p1(m.p1, "in the simple margins")?;
    if steps < 2 {
        return Err(BoundsError::InvalidInput(format!(
            "sweep needs at least 2 steps, got {steps}"
        )));
    }
    let survive = m.p0.complement();
    let die = m.p1;
    let vertices = [
        0.0,
        survive.value(),
        die.value(),
        survive.value() + die.value() - 1.0,
    ];
    let grid = (0..=steps).map(|i| i as f64 / steps as f64);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in grid.chain(vertices) {
        if let Ok(c) = Coupling2::from_intersection(survive, die, q) {
            let pc = c.p11.value() / die.value();
            lo = lo.min(pc);
            hi = hi.max(pc);
        }
    }
    BoundInterval::new(lo, hi)
}

/// Joint law over the six potential variables.
///
/// `m_block[i]`: bit `x` of `i` is `M(x)`.
/// `y_block[j]`: bit `2x + m` of `j` is `Y*(x, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLaw")]
pub struct PotentialOutcomeLaw {
    m_block: [f64; 4],
    y_block: [f64; 16],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLaw {
    m_block: Vec<f64>,
    y_block: Vec<f64>,
}

impl TryFrom<RawLaw> for PotentialOutcomeLaw {
    type Error = BoundsError;

    fn try_from(raw: RawLaw) -> Result<Self> {
        let m_block: [f64; 4] = raw.m_block.try_into().map_err(|v: Vec<f64>| {
            BoundsError::InvalidInput(format!("m_block needs 4 cells, got {}", v.len()))
        })?;
        let y_block: [f64; 16] = raw.y_block.try_into().map_err(|v: Vec<f64>| {
            BoundsError::InvalidInput(format!("y_block needs 16 cells, got {}", v.len()))
        })?;
        PotentialOutcomeLaw::new(m_block, y_block)
    }
}

fn check_block(cells: &[f64], name: &str) -> Result<()> {
    if let Some(c) = cells.iter().find(|c| c.is_nan() || **c < 0.0) {
        return Err(BoundsError::InvalidInput(format!(
            "{name} has a negative or NaN cell {c}"
        )));
    }
    let total: f64 = cells.iter().sum();
    if (total - 1.0).abs() > STRUCT_TOL {
        return Err(BoundsError::InvalidInput(format!(
            "{name} sums to {total}, not 1"
        )));
    }
    Ok(())
}

#[inline]
fn bit(index: usize, position: usize) -> usize {
    (index >> position) & 1
}

/// Probability that bit `position` is set, for a table over binary variables.
fn bit_margin(cells: &[f64], position: usize) -> f64 {
    cells
        .iter()
        .enumerate()
        .filter(|(i, _)| bit(*i, position) == 1)
        .map(|(_, c)| c)
        .sum()
}

impl PotentialOutcomeLaw {
    pub fn new(m_block: [f64; 4], y_block: [f64; 16]) -> Result<Self> {
        check_block(&m_block, "m_block")?;
        check_block(&y_block, "y_block")?;
        Ok(PotentialOutcomeLaw { m_block, y_block })
    }

    /// All potential variables mutually independent with the given margins.
    pub fn independent(m: &PartialMediationMargins) -> Self {
        let product = |probs: &[f64], i: usize| -> f64 {
            probs
                .iter()
                .enumerate()
                .map(|(k, p)| if bit(i, k) == 1 { *p } else { 1.0 - p })
                .product()
        };
        let mp = [m.m0.value(), m.m1.value()];
        let yp = [m.y00.value(), m.y01.value(), m.y10.value(), m.y11.value()];
        PotentialOutcomeLaw {
            m_block: std::array::from_fn(|i| product(&mp, i)),
            y_block: std::array::from_fn(|j| product(&yp, j)),
        }
    }

    /// A single deterministic individual type.
    pub fn point_mass(m_cell: usize, y_cell: usize) -> Self {
        assert!(m_cell < 4 && y_cell < 16, "cell index out of range");
        let mut m_block = [0.0; 4];
        let mut y_block = [0.0; 16];
        m_block[m_cell] = 1.0;
        y_block[y_cell] = 1.0;
        PotentialOutcomeLaw { m_block, y_block }
    }

    pub fn m_block(&self) -> &[f64; 4] {
        &self.m_block
    }

    pub fn y_block(&self) -> &[f64; 16] {
        &self.y_block
    }

    /// The one-dimensional margins this law induces.
    pub fn implied_margins(&self) -> PartialMediationMargins {
        let p = |v: f64| Probability::saturating(v);
        PartialMediationMargins {
            y00: p(bit_margin(&self.y_block, 0)),
            y01: p(bit_margin(&self.y_block, 1)),
            y10: p(bit_margin(&self.y_block, 2)),
            y11: p(bit_margin(&self.y_block, 3)),
            m0: p(bit_margin(&self.m_block, 0)),
            m1: p(bit_margin(&self.m_block, 1)),
        }
    }

    /// Largest absolute difference between the implied and the given margins.
    pub fn margin_error(&self, m: &PartialMediationMargins) -> f64 {
        self.implied_margins()
            .as_array()
            .iter()
            .zip(m.as_array())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `(P(Y(0)=0, Y(1)=1), P(Y(1)=1))` with `Y(x) = Y*(x, M(x))`, by enumerating
/// all 64 cells.
fn causation_parts(m_block: &[f64; 4], y_block: &[f64; 16]) -> (f64, f64) {
    let mut joint = 0.0;
    let mut exposed = 0.0;
    for (mi, pm) in m_block.iter().enumerate() {
        for (yi, py) in y_block.iter().enumerate() {
            let y0 = bit(yi, bit(mi, 0));
            let y1 = bit(yi, 2 + bit(mi, 1));
            if y1 == 1 {
                let w = pm * py;
                exposed += w;
                if y0 == 0 {
                    joint += w;
                }
            }
        }
    }
    (joint, exposed)
}

fn pc_from_parts(joint: f64, exposed: f64) -> Result<Probability> {
    if exposed <= 0.0 {
        return Err(BoundsError::PcUndefined(
            "P(Y(1)=1) = 0 under the law".to_string(),
        ));
    }
    Probability::clamped(joint / exposed)
}

/// Exact probability of causation under the law.
pub fn true_pc(law: &PotentialOutcomeLaw) -> Result<Probability> {
    let (joint, exposed) = causation_parts(&law.m_block, &law.y_block);
    pc_from_parts(joint, exposed)
}

/// True probability of causation for an exposed individual whose mediator
/// pair follows `exposed_m_block` instead of the experimental one.
pub fn true_pc_with_mediator(
    law: &PotentialOutcomeLaw,
    exposed_m_block: &[f64; 4],
) -> Result<Probability> {
    check_block(exposed_m_block, "exposed m_block")?;
    let (joint, exposed) = causation_parts(exposed_m_block, &law.y_block);
    pc_from_parts(joint, exposed)
}

fn random_simplex<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    loop {
        let mut cells: [f64; N] = std::array::from_fn(|_| Exp1.sample(&mut *rng));
        let total: f64 = cells.iter().sum();
        if total > 0.0 {
            cells.iter_mut().for_each(|c| *c /= total);
            return cells;
        }
    }
}

/// Iterative proportional fitting of a normalized table over binary
/// variables to one-dimensional targets. Returns the number of rounds used,
/// or `None` without convergence.
fn fit_binary_margins(cells: &mut [f64], targets: &[f64]) -> Option<usize> {
    let max_error = |cells: &[f64]| {
        let total: f64 = cells.iter().sum();
        targets
            .iter()
            .enumerate()
            .map(|(k, t)| (bit_margin(cells, k) - t).abs())
            .fold((total - 1.0).abs(), f64::max)
    };
    for round in 1..=IPF_MAX_ROUNDS {
        for (k, &target) in targets.iter().enumerate() {
            let on = bit_margin(cells, k);
            let off: f64 = cells.iter().sum::<f64>() - on;
            let scale_on = if on > 0.0 { target / on } else { 0.0 };
            let scale_off = if off > 0.0 { (1.0 - target) / off } else { 0.0 };
            for (i, c) in cells.iter_mut().enumerate() {
                *c *= if bit(i, k) == 1 { scale_on } else { scale_off };
            }
        }
        if max_error(cells) < IPF_TOL {
            return Some(round);
        }
    }
    None
}

fn sample_block<const N: usize>(rng: &mut ChaCha8Rng, targets: &[f64]) -> Result<[f64; N]> {
    for _ in 0..MAX_RESAMPLES {
        let mut cells = random_simplex::<N>(rng);
        if fit_binary_margins(&mut cells, targets).is_some() {
            return Ok(cells);
        }
    }
    Err(BoundsError::GenerationFailure(format!(
        "proportional fitting did not converge in {MAX_RESAMPLES} attempts for margins {targets:?}"
    )))
}

fn sample_law(m: &PartialMediationMargins, rng: &mut ChaCha8Rng) -> Result<PotentialOutcomeLaw> {
    let m_targets = [m.m0.value(), m.m1.value()];
    let y_targets = [m.y00.value(), m.y01.value(), m.y10.value(), m.y11.value()];
    let m_block = sample_block::<4>(rng, &m_targets)?;
    let y_block = sample_block::<16>(rng, &y_targets)?;
    PotentialOutcomeLaw::new(m_block, y_block)
}

/// Draws `n` random laws matching the margins. Law `i` uses its own
/// generator stream, so the result does not depend on thread scheduling.
pub fn sample_laws(
    m: &PartialMediationMargins,
    n: usize,
    seed: u64,
) -> Result<Vec<PotentialOutcomeLaw>> {
    if n == 0 {
        return Err(BoundsError::InvalidInput("need at least one law".into()));
    }
    (0..n)
        .into_par_iter()
        .map(|i| sample_law(m, &mut stream_rng(seed, i as u64)))
        .collect()
}

/// One observed individual in a randomized trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrialRecord {
    pub x: bool,
    pub m: Option<bool>,
    pub y: bool,
}

impl TrialRecord {
    pub fn new(x: bool, m: Option<bool>, y: bool) -> Self {
        TrialRecord { x, m, y }
    }
}

/// Simulates a two-arm randomized trial: each individual's potential
/// variables are drawn from the law and the ones selected by the assigned
/// arm are recorded.
pub fn simulate_trial(
    law: &PotentialOutcomeLaw,
    n_per_arm: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if n_per_arm == 0 {
        return Err(BoundsError::InvalidInput(
            "need at least one individual per arm".into(),
        ));
    }
    let invalid = |e: rand::distr::weighted::Error| BoundsError::InvalidInput(e.to_string());
    let m_dist = WeightedIndex::new(law.m_block).map_err(invalid)?;
    let y_dist = WeightedIndex::new(law.y_block).map_err(invalid)?;

    let mut records = Vec::with_capacity(2 * n_per_arm);
    for x in 0..2usize {
        let mut rng = stream_rng(seed, x as u64);
        for _ in 0..n_per_arm {
            let mediator = bit(m_dist.sample(&mut rng), x);
            let outcome = bit(y_dist.sample(&mut rng), 2 * x + mediator);
            records.push(TrialRecord::new(x == 1, Some(mediator == 1), outcome == 1));
        }
    }
    Ok(records)
}

/// How sampled laws relate to the population the bound is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// The exposed individual shares the experimental law.
    Faithful,
    /// The exposed individual's mediator pair follows an unrelated law,
    /// breaking `M(x)` independent of `X`. Diagnostic only.
    ConfoundedMediator,
}

/// Outcome of checking many sampled laws against the closed-form bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub margins: PartialMediationMargins,
    pub mode: SamplingMode,
    pub samples: usize,
    pub seed: u64,
    pub partial_interval: BoundInterval,
    pub simple_interval: BoundInterval,
    /// Laws whose true PC fell outside the partial-mediation interval.
    pub violations: usize,
    /// Laws whose true PC fell outside the simple interval.
    pub simple_violations: usize,
    /// Laws whose margins missed the targets by more than `1e-10`.
    pub margin_failures: usize,
    /// Laws with `P(Y(1)=1) = 0` for the exposed individual.
    pub undefined: usize,
    pub max_margin_error: f64,
    pub min_true_pc: f64,
    pub max_true_pc: f64,
    /// `upper - max_true_pc`; observed, not proven.
    pub upper_gap: f64,
    /// `min_true_pc - lower`; observed, not proven.
    pub lower_gap: f64,
    pub gap_note: String,
    pub passed: bool,
}

struct LawCheck {
    pc: Option<f64>,
    margin_error: f64,
}

/// Samples `samples` laws consistent with `m` and checks each true PC
/// against the partial and simple intervals.
pub fn verify(
    m: &PartialMediationMargins,
    samples: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<VerificationReport> {
    let partial_interval = partial_bounds(m)?;
    let simple_interval = simple_bounds(&derive_simple_from_partial(m))?;
    let laws = sample_laws(m, samples, seed)?;

    let checks: Vec<LawCheck> = laws
        .par_iter()
        .enumerate()
        .map(|(i, law)| {
            let pc = match mode {
                SamplingMode::Faithful => true_pc(law),
                SamplingMode::ConfoundedMediator => {
                    // Separate stream range from the law draws.
                    let mut rng = stream_rng(seed, (1 << 32) + i as u64);
                    true_pc_with_mediator(law, &random_simplex::<4>(&mut rng))
                }
            };
            LawCheck {
                pc: pc.ok().map(Probability::value),
                margin_error: law.margin_error(m),
            }
        })
        .collect();

    let pcs: Vec<f64> = checks.iter().filter_map(|c| c.pc).collect();
    let violations = pcs
        .iter()
        .filter(|pc| !partial_interval.contains(**pc, SOUNDNESS_TOL))
        .count();
    let simple_violations = pcs
        .iter()
        .filter(|pc| !simple_interval.contains(**pc, SOUNDNESS_TOL))
        .count();
    let margin_failures = checks.iter().filter(|c| c.margin_error > 1e-10).count();
    let max_margin_error = checks.iter().map(|c| c.margin_error).fold(0.0, f64::max);
    let min_true_pc = pcs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_true_pc = pcs.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(VerificationReport {
        margins: *m,
        mode,
        samples,
        seed,
        partial_interval,
        simple_interval,
        violations,
        simple_violations,
        margin_failures,
        undefined: checks.len() - pcs.len(),
        max_margin_error,
        min_true_pc,
        max_true_pc,
        upper_gap: partial_interval.upper().value() - max_true_pc,
        lower_gap: min_true_pc - partial_interval.lower().value(),
        gap_note: "observed, not proven".to_string(),
        passed: violations == 0 && simple_violations == 0 && margin_failures == 0,
    })
}
