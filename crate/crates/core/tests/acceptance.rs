//! Acceptance criteria. Each test prints one line per check and a verdict
//! line per criterion; run with `--nocapture` to see them.

use std::time::{Duration, Instant};

use causation_bounds::cli::{exit_code, run, EXIT_INESTIMABLE, EXIT_INVALID};
use causation_bounds::estimate::{estimate_partial, margins_from_count_table, Dataset};
use causation_bounds::mediation::{
    compare, complete_bounds, complete_numerator, derive_simple_from_partial, partial_bounds,
    partial_terms, partial_upper_numerator, simple_numerator_via_decomposition,
    CompleteMediationMargins, PartialMediationMargins, ZeroValueListing,
};
use causation_bounds::oracle::{
    coupling_sweep_simple, sample_laws, simulate_trial, stream_rng, true_pc, SOUNDNESS_TOL,
};
use causation_bounds::probability::{interval, BoundInterval, CountTable, Probability, REPORT_TOL};
use causation_bounds::simple::{risk_ratio, simple_bounds, RiskRatio, SimpleMargins};
use causation_bounds::BoundsError;
use rand::Rng;

struct Criterion {
    number: u32,
    title: &'static str,
    checks: Vec<(String, bool)>,
}

impl Criterion {
    fn new(number: u32, title: &'static str) -> Self {
        Criterion {
            number,
            title,
            checks: Vec::new(),
        }
    }

    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.check(
            format!("{what}: got {got:.6}, want {want:.4} ± {tol:.1e}"),
            ok,
        );
    }

    fn within(&mut self, what: &str, elapsed: Duration, limit: Duration) {
        self.check(
            format!("{what}: {elapsed:?} (limit {limit:?})"),
            elapsed < limit,
        );
    }

    fn finish(self) {
        for (what, ok) in &self.checks {
            println!(
                "  criterion {} [{}] {what}",
                self.number,
                if *ok { "ok" } else { "FAIL" }
            );
        }
        let passed = self.checks.iter().all(|(_, ok)| *ok);
        println!(
            "criterion {}: {} - {}",
            self.number,
            if passed { "PASS" } else { "FAIL" },
            self.title
        );
        let failed: Vec<&str> = self
            .checks
            .iter()
            .filter(|(_, ok)| !ok)
            .map(|(w, _)| w.as_str())
            .collect();
        assert!(passed, "criterion {} failed: {failed:#?}", self.number);
    }
}

fn example_one() -> PartialMediationMargins {
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

fn example_two() -> PartialMediationMargins {
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

fn random_partial(rng: &mut impl Rng) -> PartialMediationMargins {
    loop {
        let v: [f64; 6] = std::array::from_fn(|_| rng.random::<f64>());
        let m = PartialMediationMargins::new(v[0], v[1], v[2], v[3], v[4], v[5]).unwrap();
        if derive_simple_from_partial(&m).p1.value() > 0.0 {
            return m;
        }
    }
}

#[test]
fn criterion_1_trial_counts() {
    let mut c = Criterion::new(1, "trial counts: risk ratio and simple bounds");
    let start = Instant::now();
    let margins = margins_from_count_table(&CountTable::new(30, 100, 12, 100).unwrap()).unwrap();
    let rr = risk_ratio(&margins);
    let bounds = simple_bounds(&margins).unwrap();
    let elapsed = start.elapsed();

    c.check(
        format!("RR = {rr:?}, want exactly 2.5"),
        rr == RiskRatio::Finite(2.5),
    );
    c.near("lower", bounds.lower().value(), 0.60, 1e-9);
    c.near("upper", bounds.upper().value(), 1.00, 1e-9);
    c.within("runtime", elapsed, Duration::from_millis(1));
    c.finish();
}

#[test]
fn criterion_2_first_mediation_example() {
    let mut c = Criterion::new(2, "first partial-mediation example");
    let start = Instant::now();
    let m = example_one();
    let partial = partial_bounds(&m).unwrap();
    let derived = derive_simple_from_partial(&m);
    let simple = simple_bounds(&derived).unwrap();
    let elapsed = start.elapsed();

    c.near("partial lower", partial.lower().value(), 0.65, REPORT_TOL);
    c.near("partial upper", partial.upper().value(), 0.81, REPORT_TOL);
    c.near("simple lower", simple.lower().value(), 0.65, REPORT_TOL);
    c.near("simple upper", simple.upper().value(), 1.00, REPORT_TOL);
    c.near("derived P(Y=1|X<-1)", derived.p1.value(), 0.69, REPORT_TOL);
    c.near("derived P(Y=1|X<-0)", derived.p0.value(), 0.24, REPORT_TOL);
    c.within("runtime", elapsed, Duration::from_millis(1));
    c.finish();
}

#[test]
fn criterion_3_second_mediation_example() {
    let mut c = Criterion::new(3, "second partial-mediation example");
    let m = example_two();
    let partial = partial_bounds(&m).unwrap();
    let derived = derive_simple_from_partial(&m);
    let simple = simple_bounds(&derived).unwrap();
    let combined = compare(&m, false).unwrap().combined_interval;

    c.near("partial lower", partial.lower().value(), 0.59, REPORT_TOL);
    c.near("partial upper", partial.upper().value(), 0.95, REPORT_TOL);
    c.near("simple lower", simple.lower().value(), 0.59, REPORT_TOL);
    c.near("simple upper", simple.upper().value(), 0.88, REPORT_TOL);
    c.near("combined lower", combined.lower().value(), 0.59, REPORT_TOL);
    c.near("combined upper", combined.upper().value(), 0.88, REPORT_TOL);
    c.near("derived P(Y=1|X<-1)", derived.p1.value(), 0.78, REPORT_TOL);
    c.near("derived P(Y=1|X<-0)", derived.p0.value(), 0.32, REPORT_TOL);
    c.finish();
}

#[test]
fn criterion_4_oracle_soundness() {
    let mut c = Criterion::new(4, "oracle soundness over sampled laws");
    let start = Instant::now();
    let mut rng = stream_rng(4, 0);
    let mut sets = vec![
        ("first example".to_string(), example_one()),
        ("second example".to_string(), example_two()),
    ];
    for i in 0..50 {
        sets.push((format!("random set {i}"), random_partial(&mut rng)));
    }

    let mut total_laws = 0;
    let mut worst_margin: f64 = 0.0;
    for (k, (name, m)) in sets.iter().enumerate() {
        let bounds = partial_bounds(m).unwrap();
        let laws = sample_laws(m, 1000, 1000 + k as u64).unwrap();
        let outside: Vec<f64> = laws
            .iter()
            .map(|law| true_pc(law).unwrap().value())
            .filter(|pc| !bounds.contains(*pc, SOUNDNESS_TOL))
            .collect();
        worst_margin = laws
            .iter()
            .map(|l| l.margin_error(m))
            .fold(worst_margin, f64::max);
        total_laws += laws.len();
        if !outside.is_empty() || k < 2 {
            c.check(
                format!(
                    "{name}: {} of {} laws outside {bounds:.4}",
                    outside.len(),
                    laws.len()
                ),
                outside.is_empty(),
            );
        }
    }
    c.check(
        format!(
            "{total_laws} laws over {} margin sets, all inside",
            sets.len()
        ),
        total_laws == 52_000,
    );
    c.check(
        format!("worst margin error {worst_margin:.2e} <= 1e-10"),
        worst_margin <= 1e-10,
    );
    c.within("runtime", start.elapsed(), Duration::from_secs(30));
    c.finish();
}

#[test]
fn criterion_5_sweep_equivalence() {
    let mut c = Criterion::new(5, "coupling sweep matches closed-form simple bounds");
    let start = Instant::now();
    let mut rng = stream_rng(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let p1 = loop {
            let v: f64 = rng.random();
            if v > 0.0 {
                break v;
            }
        };
        let m = SimpleMargins::new(p1, rng.random()).unwrap();
        let sweep = coupling_sweep_simple(&m, 100).unwrap();
        let closed = simple_bounds(&m).unwrap();
        worst = worst
            .max((sweep.lower().value() - closed.lower().value()).abs())
            .max((sweep.upper().value() - closed.upper().value()).abs());
    }
    c.check(
        format!("max endpoint gap {worst:.2e} <= 1e-9"),
        worst <= 1e-9,
    );
    c.within("runtime", start.elapsed(), Duration::from_secs(5));
    c.finish();
}

#[test]
fn criterion_6_dominance_properties() {
    let mut c = Criterion::new(6, "mediation dominance properties");
    let mut lower_eq = 0;
    let mut two_x = 0;
    let mut termwise = 0;
    let mut dominance = 0;
    let mut case_split = 0;

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let mut grid_points = 0;
    for &a in &grid {
        for &b in &grid {
            for &cc in &grid {
                for &d in &grid {
                    grid_points += 1;
                    let cm = CompleteMediationMargins::new(a, b, cc, d).unwrap();
                    let pm =
                        PartialMediationMargins::new(1.0 - cc, d, 1.0 - cc, d, 1.0 - a, b).unwrap();
                    let [_, t2, t3, _] = partial_terms(&pm);
                    if (complete_numerator(&cm).value() - (t2.value() + t3.value())).abs() > 1e-12 {
                        case_split += 1;
                    }
                    if derive_simple_from_partial(&pm).p1.value() > 0.0 {
                        let complete = complete_bounds(&cm).unwrap().upper().value();
                        let partial = partial_bounds(&pm).unwrap().upper().value();
                        let simple = simple_bounds(&derive_simple_from_partial(&pm))
                            .unwrap()
                            .upper()
                            .value();
                        if complete > partial + 1e-9 || complete > simple + 1e-9 {
                            dominance += 1;
                        }
                    }
                }
            }
        }
    }

    let mut rng = stream_rng(6, 0);
    for _ in 0..10_000 {
        let m = random_partial(&mut rng);
        let dec = simple_numerator_via_decomposition(&m);
        let partial = partial_bounds(&m).unwrap();
        let simple = simple_bounds(&derive_simple_from_partial(&m)).unwrap();
        if partial.lower() != simple.lower() {
            lower_eq += 1;
        }
        if partial_upper_numerator(&m).value() > 2.0 * dec.numerator.value() + 1e-9 {
            two_x += 1;
        }
        let [t1, t2, t3, t4] = partial_terms(&m);
        if t1 > dec.alpha || t2 > dec.alpha || t3 > dec.beta || t4 > dec.beta {
            termwise += 1;
        }
        // Same set with the direct effect removed.
        let collapsed = PartialMediationMargins {
            y10: m.y00,
            y11: m.y01,
            ..m
        };
        if derive_simple_from_partial(&collapsed).p1.value() > 0.0 {
            let r = compare(&collapsed, true).unwrap();
            let cu = r.complete_interval.unwrap().upper();
            if cu.value() > r.partial_interval.upper().value() + 1e-9
                || cu.value() > r.simple_interval.upper().value() + 1e-9
            {
                dominance += 1;
            }
        }
    }

    c.check(
        format!("equal lower bounds violations: {lower_eq}"),
        lower_eq == 0,
    );
    c.check(
        format!("partial numerator within twice simple violations: {two_x}"),
        two_x == 0,
    );
    c.check(
        format!("termwise dominance violations: {termwise}"),
        termwise == 0,
    );
    c.check(
        format!("complete-mediation dominance violations: {dominance}"),
        dominance == 0,
    );
    c.check(
        format!("case-split equivalence violations: {case_split} over {grid_points} grid points"),
        case_split == 0 && grid_points == 21usize.pow(4),
    );
    c.finish();
}

#[test]
fn criterion_7_simulation_round_trip() {
    let mut c = Criterion::new(7, "simulation round trip at 10^6 per arm");
    let start = Instant::now();
    let m = example_one();
    let law = &sample_laws(&m, 1, 7).unwrap()[0];
    let n = 1_000_000;
    let data = Dataset::new(simulate_trial(law, n, 7).unwrap(), "simulated").unwrap();
    let est = estimate_partial(&data).unwrap();

    let se = |p: f64, size: f64| (p * (1.0 - p) / size).sqrt();
    for x in 0..2 {
        let mx = m.mediator(x).value();
        let got = est.mediator(x).value();
        let tol = 4.0 * se(mx, n as f64);
        c.near(&format!("P(M({x})=1)"), got, mx, tol);
        for med in 0..2 {
            let stratum = n as f64 * if med == 1 { mx } else { 1.0 - mx };
            let want = m.outcome(x, med).value();
            c.near(
                &format!("P(Y*({x},{med})=1)"),
                est.outcome(x, med).value(),
                want,
                4.0 * se(want, stratum),
            );
        }
    }

    let partial = partial_bounds(&est).unwrap();
    let simple = simple_bounds(&derive_simple_from_partial(&est)).unwrap();
    c.near(
        "estimated partial lower",
        partial.lower().value(),
        0.65,
        0.01,
    );
    c.near(
        "estimated partial upper",
        partial.upper().value(),
        0.81,
        0.01,
    );
    c.near("estimated simple lower", simple.lower().value(), 0.65, 0.01);
    c.near("estimated simple upper", simple.upper().value(), 1.00, 0.01);

    let exact = partial_bounds(&m).unwrap();
    c.near(
        "estimated partial upper vs exact",
        partial.upper().value(),
        exact.upper().value(),
        0.01,
    );
    c.within("runtime", start.elapsed(), Duration::from_secs(60));
    c.finish();
}

#[test]
fn criterion_8_error_paths() {
    let mut c = Criterion::new(8, "error paths and exit codes");

    let zero = SimpleMargins::new(0.0, 0.12).unwrap();
    let e = simple_bounds(&zero).unwrap_err();
    c.check(
        format!("p1 = 0 -> {e} (exit {})", exit_code(&e)),
        matches!(e, BoundsError::PcUndefined(_)) && exit_code(&e) == EXIT_INESTIMABLE,
    );

    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("zero.json");
    std::fs::write(
        &counts,
        r#"{"exposed_event":0,"exposed_total":100,"unexposed_event":12,"unexposed_total":100}"#,
    )
    .unwrap();
    let code = run(
        ["pcbounds", "simple", "--counts", counts.to_str().unwrap()],
        &mut Vec::new(),
        &mut Vec::new(),
    );
    c.check(format!("CLI p1 = 0 exits {code}"), code == EXIT_INESTIMABLE);

    let records = vec![
        causation_bounds::oracle::TrialRecord::new(false, Some(false), false),
        causation_bounds::oracle::TrialRecord::new(false, Some(true), true),
        causation_bounds::oracle::TrialRecord::new(true, Some(false), true),
    ];
    let e = estimate_partial(&Dataset::new(records, "gap").unwrap()).unwrap_err();
    c.check(
        format!("empty stratum -> {e} (exit {})", exit_code(&e)),
        matches!(&e, BoundsError::InsufficientData(msg) if msg.contains("(x=1, m=1)"))
            && exit_code(&e) == EXIT_INESTIMABLE,
    );

    let csv = dir.path().join("gap.csv");
    std::fs::write(&csv, "x,m,y\n0,0,0\n0,1,1\n1,0,1\n").unwrap();
    let code = run(
        ["pcbounds", "partial", "--records", csv.to_str().unwrap()],
        &mut Vec::new(),
        &mut Vec::new(),
    );
    c.check(
        format!("CLI empty stratum exits {code}"),
        code == EXIT_INESTIMABLE,
    );

    let p = |x: f64| Probability::new(x).unwrap();
    let e = interval(p(0.7), p(0.3)).unwrap_err();
    c.check(
        format!("lower > upper -> {e} (exit {})", exit_code(&e)),
        matches!(e, BoundsError::InconsistentBounds { .. }) && exit_code(&e) == EXIT_INVALID,
    );
    let e = BoundInterval::new(0.7, 0.3).unwrap_err();
    c.check(
        "BoundInterval::new(0.7, 0.3) is inconsistent",
        matches!(e, BoundsError::InconsistentBounds { .. }),
    );
    c.finish();
}
