//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 inestimable (PC undefined or
//! insufficient data), 3 verification failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::BoundsError;
use crate::estimate::{
    count_table_from_json_str, estimate_complete, estimate_partial, estimate_simple,
    margins_from_count_table, Dataset, MarginsInput, RecordsSummary,
};
use crate::mediation::{
    compare_with_tolerance, complete_bounds, derive_simple_from_complete,
    derive_simple_from_partial, partial_bounds, ComparisonReport, CompleteMediationMargins,
    PartialMediationMargins, TightestUpper,
};
use crate::oracle::{
    simulate_trial, verify, PotentialOutcomeLaw, SamplingMode, VerificationReport,
};
use crate::probability::{BoundInterval, CountTable, Probability, REPORT_TOL, STRUCT_TOL};
use crate::simple::{risk_ratio, simple_bounds, SimpleMargins};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INESTIMABLE: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pcbounds",
    version,
    about = "Bounds on the probability of causation from experimental data"
)]
struct Cli {
    /// Emit the report as JSON on stdout.
    #[arg(long, global = true)]
    json: bool,

    /// Tolerance for consistency checks against data (default 0.005).
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bounds from exposure and outcome only.
    Simple(SimpleSource),
    /// Bounds under complete mediation.
    Complete(MediationSource),
    /// Bounds under partial mediation.
    Partial(MediationSource),
    /// Compare simple, partial and (optionally) complete-mediation bounds.
    Compare {
        #[command(flatten)]
        source: MediationSource,
        /// Also assume complete mediation (no direct effect).
        #[arg(long)]
        complete: bool,
    },
    /// Check the bounds against randomly sampled potential-outcome laws.
    Verify {
        #[arg(long, value_name = "FILE")]
        margins: PathBuf,
        #[arg(long, value_name = "N", default_value_t = 1000)]
        samples: usize,
        #[arg(long, value_name = "S", default_value_t = 0)]
        seed: u64,
        /// Give the exposed individual an unrelated mediator law (diagnostic).
        #[arg(long)]
        confounded: bool,
    },
    /// Simulate a randomized trial from a law and write record CSV.
    Simulate {
        #[arg(long, value_name = "FILE")]
        law: PathBuf,
        #[arg(long, value_name = "N")]
        n: usize,
        #[arg(long, value_name = "S", default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct SimpleSource {
    /// Count table JSON.
    #[arg(long, value_name = "FILE")]
    counts: Option<PathBuf>,
    /// Margins JSON (simple or mediation margins).
    #[arg(long, value_name = "FILE")]
    margins: Option<PathBuf>,
    /// Record CSV.
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MediationSource {
    #[command(flatten)]
    input: MediationInput,
    /// Count table to check the derived outcome rates against.
    #[arg(long, value_name = "FILE")]
    counts: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct MediationInput {
    /// Margins JSON.
    #[arg(long, value_name = "FILE")]
    margins: Option<PathBuf>,
    /// Record CSV with header x,m,y.
    #[arg(long, value_name = "FILE")]
    records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Simple,
    Complete,
    Partial,
    Compare,
}

/// What the report was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputsEcho {
    pub source: &'static str,
    pub margins: Option<MarginsInput>,
    pub counts: Option<CountTable>,
    pub records: Option<RecordsSummary>,
    pub check_counts: Option<CountTable>,
}

/// Machine-readable result of `simple`, `complete`, `partial` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub method: Method,
    pub interval: BoundInterval,
    pub derived: Option<SimpleMargins>,
    pub diagnostics: Vec<String>,
    pub assumptions: Vec<String>,
    pub inputs_echo: InputsEcho,
    pub comparison: Option<ComparisonReport>,
}

#[derive(Debug)]
enum Failure {
    Bounds(BoundsError),
    Verification(String),
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        Failure::Bounds(e)
    }
}

/// Process exit code for a library error.
pub fn exit_code(e: &BoundsError) -> i32 {
    match e {
        BoundsError::PcUndefined(_) | BoundsError::InsufficientData(_) => EXIT_INESTIMABLE,
        BoundsError::GenerationFailure(_) => EXIT_VERIFICATION,
        BoundsError::InvalidInput(_)
        | BoundsError::InconsistentBounds { .. }
        | BoundsError::AssumptionViolation(_) => EXIT_INVALID,
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Bounds(e) => exit_code(e),
            Failure::Verification(_) => EXIT_VERIFICATION,
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_file(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| {
        BoundsError::InvalidInput(format!("cannot read {}: {e}", path.display())).into()
    })
}

fn read_margins(path: &Path) -> CliResult<MarginsInput> {
    MarginsInput::from_json_str(&read_file(path)?).map_err(|e| match e {
        BoundsError::InvalidInput(msg) => {
            BoundsError::InvalidInput(format!("{}: {msg}", path.display())).into()
        }
        other => other.into(),
    })
}

fn read_counts(path: &Path) -> CliResult<CountTable> {
    Ok(count_table_from_json_str(&read_file(path)?)?)
}

fn tags(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

const SIMPLE_ASSUMPTIONS: &[&str] = &["exchangeability", "randomization"];
const MEDIATION_ASSUMPTIONS: &[&str] = &["A1", "A2", "A3", "exchangeability", "randomization"];
const COMPLETE_ASSUMPTIONS: &[&str] = &[
    "A1",
    "A2",
    "A3",
    "no-direct-effect",
    "exchangeability",
    "randomization",
];

fn echo(source: &'static str) -> InputsEcho {
    InputsEcho {
        source,
        margins: None,
        counts: None,
        records: None,
        check_counts: None,
    }
}

fn derived_rates_note(s: &SimpleMargins) -> String {
    format!(
        "derived rates: P(Y=1|X<-1) = {:.4}, P(Y=1|X<-0) = {:.4}",
        s.p1.value(),
        s.p0.value()
    )
}

/// Flags derived rates that disagree with an independently supplied table.
fn check_against_counts(
    derived: &SimpleMargins,
    counts: &CountTable,
    tol: f64,
    diagnostics: &mut Vec<String>,
) -> CliResult<()> {
    let observed = margins_from_count_table(counts)?;
    let d1 = (derived.p1.value() - observed.p1.value()).abs();
    let d0 = (derived.p0.value() - observed.p0.value()).abs();
    if d1 > tol || d0 > tol {
        diagnostics.push(format!(
            "derived rates disagree with count table ({:.4}, {:.4}) beyond tolerance {tol}",
            observed.p1.value(),
            observed.p0.value()
        ));
    } else {
        diagnostics.push(format!(
            "derived rates consistent with count table ({:.4}, {:.4}) within {tol}",
            observed.p1.value(),
            observed.p0.value()
        ));
    }
    Ok(())
}

const RECORDS_NOTE: &str =
    "stratum rates P(Y|X=x,M=m) are read as P(Y*(x,m)); this relies on A1 for an observed mediator";

fn partial_from_complete(c: &CompleteMediationMargins) -> PartialMediationMargins {
    PartialMediationMargins {
        y00: c.c.complement(),
        y01: c.d,
        y10: c.c.complement(),
        y11: c.d,
        m0: c.a.complement(),
        m1: c.b,
    }
}

/// Simple margins embedded in a mediation model whose mediator never varies.
fn partial_from_simple(s: &SimpleMargins) -> PartialMediationMargins {
    PartialMediationMargins {
        y00: s.p0,
        y01: s.p0,
        y10: s.p1,
        y11: s.p1,
        m0: Probability::ZERO,
        m1: Probability::ZERO,
    }
}

fn simple_report(src: &SimpleSource) -> CliResult<BoundsReport> {
    let mut diagnostics = Vec::new();
    let mut derived = None;
    let (margins, inputs_echo) = if let Some(path) = &src.counts {
        let counts = read_counts(path)?;
        let m = margins_from_count_table(&counts)?;
        (
            m,
            InputsEcho {
                counts: Some(counts),
                ..echo("counts")
            },
        )
    } else if let Some(path) = &src.margins {
        let input = read_margins(path)?;
        let m = match &input {
            MarginsInput::Simple(s) => *s,
            MarginsInput::Complete(c) => {
                let s = derive_simple_from_complete(c);
                derived = Some(s);
                s
            }
            MarginsInput::Partial(p) => {
                let s = derive_simple_from_partial(p);
                derived = Some(s);
                s
            }
        };
        (
            m,
            InputsEcho {
                margins: Some(input),
                ..echo("margins")
            },
        )
    } else if let Some(path) = &src.records {
        let data = Dataset::from_csv_path(path)?;
        let m = estimate_simple(&data)?;
        (
            m,
            InputsEcho {
                margins: Some(MarginsInput::Simple(m)),
                records: Some((&data).into()),
                ..echo("records")
            },
        )
    } else {
        unreachable!("clap enforces one source")
    };

    let interval = simple_bounds(&margins)?;
    diagnostics.push(format!("risk ratio RR = {}", risk_ratio(&margins)));
    if let Some(s) = &derived {
        diagnostics.push(derived_rates_note(s));
    }
    Ok(BoundsReport {
        method: Method::Simple,
        interval,
        derived,
        diagnostics,
        assumptions: tags(SIMPLE_ASSUMPTIONS),
        inputs_echo,
        comparison: None,
    })
}

enum MediationData {
    Complete(CompleteMediationMargins),
    Partial(PartialMediationMargins),
}

/// Loads mediation margins from file, or estimates them from records in the
/// form the method needs.
fn load_mediation(
    src: &MediationSource,
    want_complete: bool,
    diagnostics: &mut Vec<String>,
) -> CliResult<(MediationData, InputsEcho)> {
    let check_counts = src.counts.as_deref().map(read_counts).transpose()?;
    if let Some(path) = &src.input.margins {
        let input = read_margins(path)?;
        let data = match (&input, want_complete) {
            (MarginsInput::Complete(c), true) => MediationData::Complete(*c),
            (MarginsInput::Partial(p), false) => MediationData::Partial(*p),
            (MarginsInput::Complete(c), false) => MediationData::Partial(partial_from_complete(c)),
            (MarginsInput::Partial(p), true) => {
                // Validate the claim of no direct effect before collapsing.
                MediationData::Complete(crate::mediation::collapse_to_complete(p, STRUCT_TOL)?)
            }
            (MarginsInput::Simple(_), _) => {
                return Err(BoundsError::InvalidInput(format!(
                    "{}: mediation bounds need mediator margins, found p1/p0",
                    path.display()
                ))
                .into())
            }
        };
        let inputs = InputsEcho {
            margins: Some(input),
            check_counts,
            ..echo("margins")
        };
        return Ok((data, inputs));
    }

    let path = src
        .input
        .records
        .as_ref()
        .expect("clap enforces one source");
    let dataset = Dataset::from_csv_path(path)?;
    diagnostics.push(RECORDS_NOTE.to_string());
    let (data, margins) = if want_complete {
        let est = estimate_complete(&dataset)?;
        diagnostics.extend(est.warnings);
        (
            MediationData::Complete(est.margins),
            MarginsInput::Complete(est.margins),
        )
    } else {
        let p = estimate_partial(&dataset)?;
        (MediationData::Partial(p), MarginsInput::Partial(p))
    };
    let inputs = InputsEcho {
        margins: Some(margins),
        records: Some((&dataset).into()),
        check_counts,
        ..echo("records")
    };
    Ok((data, inputs))
}

fn mediation_report(src: &MediationSource, method: Method, tol: f64) -> CliResult<BoundsReport> {
    let mut diagnostics = Vec::new();
    let (data, inputs_echo) = load_mediation(src, method == Method::Complete, &mut diagnostics)?;
    let (interval, derived, assumptions) = match data {
        MediationData::Complete(c) => (
            complete_bounds(&c)?,
            derive_simple_from_complete(&c),
            COMPLETE_ASSUMPTIONS,
        ),
        MediationData::Partial(p) => (
            partial_bounds(&p)?,
            derive_simple_from_partial(&p),
            MEDIATION_ASSUMPTIONS,
        ),
    };
    diagnostics.push(derived_rates_note(&derived));
    if let Some(c) = &inputs_echo.check_counts {
        check_against_counts(&derived, c, tol, &mut diagnostics)?;
    }
    Ok(BoundsReport {
        method,
        interval,
        derived: Some(derived),
        diagnostics,
        assumptions: tags(assumptions),
        inputs_echo,
        comparison: None,
    })
}

fn compare_report(
    src: &MediationSource,
    complete: bool,
    tol_override: Option<f64>,
) -> CliResult<BoundsReport> {
    let mut diagnostics = Vec::new();
    let (data, inputs_echo) = load_mediation(src, false, &mut diagnostics)?;
    let MediationData::Partial(p) = data else {
        unreachable!("partial form requested")
    };
    // Analytic margins must satisfy the no-direct-effect identity exactly;
    // estimated ones only up to sampling noise.
    let claim_tol = match inputs_echo.source {
        "records" => tol_override.unwrap_or(REPORT_TOL),
        _ => STRUCT_TOL,
    };
    let cmp = compare_with_tolerance(&p, complete, claim_tol)?;
    let derived = derive_simple_from_partial(&p);
    diagnostics.push(derived_rates_note(&derived));
    if let Some(c) = &inputs_echo.check_counts {
        check_against_counts(
            &derived,
            c,
            tol_override.unwrap_or(REPORT_TOL),
            &mut diagnostics,
        )?;
    }
    diagnostics.push(
        match cmp.tightest_upper {
            TightestUpper::Simple => "simple upper bound is smaller; the mediator did not help",
            TightestUpper::Partial => "partial-mediation upper bound is smaller",
            TightestUpper::Complete => "complete-mediation upper bound is smallest",
        }
        .to_string(),
    );
    diagnostics.push(format!(
        "partial numerator {:.4} <= 2 x simple numerator {:.4}",
        cmp.numerator_partial.value(),
        cmp.numerator_simple.value()
    ));
    Ok(BoundsReport {
        method: Method::Compare,
        interval: cmp.combined_interval,
        derived: Some(derived),
        diagnostics,
        assumptions: tags(if complete {
            COMPLETE_ASSUMPTIONS
        } else {
            MEDIATION_ASSUMPTIONS
        }),
        inputs_echo,
        comparison: Some(cmp),
    })
}

fn render_report(r: &BoundsReport) -> String {
    let mut s = String::new();
    let method = match r.method {
        Method::Simple => "simple",
        Method::Complete => "complete mediation",
        Method::Partial => "partial mediation",
        Method::Compare => "comparison",
    };
    let _ = writeln!(s, "method:      {method}");
    let _ = writeln!(s, "PC bounds:   {:.2}", r.interval);
    if let Some(d) = &r.derived {
        let _ = writeln!(
            s,
            "derived:     P(Y=1|X<-1) = {:.2}, P(Y=1|X<-0) = {:.2}",
            d.p1, d.p0
        );
    }
    if let Some(c) = &r.comparison {
        let _ = writeln!(s, "\n  {:<10} {:>6} {:>6}", "regime", "lower", "upper");
        let mut row = |name: &str, i: &BoundInterval| {
            let _ = writeln!(
                s,
                "  {:<10} {:>6.2} {:>6.2}",
                name,
                i.lower().value(),
                i.upper().value()
            );
        };
        row("simple", &c.simple_interval);
        row("partial", &c.partial_interval);
        if let Some(ci) = &c.complete_interval {
            row("complete", ci);
        }
        row("combined", &c.combined_interval);
        let _ = writeln!(
            s,
            "\n  alpha {:.4}  beta {:.4}  gamma {:.4}  delta {:.4}\n",
            c.alpha, c.beta, c.gamma, c.delta
        );
    }
    let _ = writeln!(s, "assumptions: {}", r.assumptions.join(", "));
    if !r.diagnostics.is_empty() {
        let _ = writeln!(s, "diagnostics:");
        for d in &r.diagnostics {
            let _ = writeln!(s, "  - {d}");
        }
    }
    s
}

fn render_verification(r: &VerificationReport) -> String {
    let mut s = String::new();
    let status = if r.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "verification: {status} ({:?} sampling)", r.mode);
    let _ = writeln!(s, "laws sampled: {} (seed {})", r.samples, r.seed);
    let _ = writeln!(s, "partial interval: {:.4}", r.partial_interval);
    let _ = writeln!(s, "simple interval:  {:.4}", r.simple_interval);
    let _ = writeln!(
        s,
        "true PC range:    [{:.4}, {:.4}]",
        r.min_true_pc, r.max_true_pc
    );
    let _ = writeln!(
        s,
        "violations: partial {}, simple {}, margin {}",
        r.violations, r.simple_violations, r.margin_failures
    );
    let _ = writeln!(s, "gap to upper bound: {:.4} ({})", r.upper_gap, r.gap_note);
    s
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, text: String) -> CliResult<()> {
    let res = if json {
        serde_json::to_string_pretty(value)
            .map_err(|e| std::io::Error::other(e.to_string()))
            .and_then(|j| writeln!(out, "{j}"))
    } else {
        write!(out, "{text}")
    };
    res.map_err(|e| BoundsError::InvalidInput(format!("cannot write output: {e}")).into())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    if let Some(t) = cli.tol {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(
                BoundsError::InvalidInput(format!("--tol must be nonnegative, got {t}")).into(),
            );
        }
    }
    let tol = cli.tol.unwrap_or(REPORT_TOL);
    match &cli.command {
        Command::Simple(src) => {
            let r = simple_report(src)?;
            emit(out, cli.json, &r, render_report(&r))
        }
        Command::Complete(src) => {
            let r = mediation_report(src, Method::Complete, tol)?;
            emit(out, cli.json, &r, render_report(&r))
        }
        Command::Partial(src) => {
            let r = mediation_report(src, Method::Partial, tol)?;
            emit(out, cli.json, &r, render_report(&r))
        }
        Command::Compare { source, complete } => {
            let r = compare_report(source, *complete, cli.tol)?;
            emit(out, cli.json, &r, render_report(&r))
        }
        Command::Verify {
            margins,
            samples,
            seed,
            confounded,
        } => {
            let partial = match read_margins(margins)? {
                MarginsInput::Partial(p) => p,
                MarginsInput::Complete(c) => partial_from_complete(&c),
                MarginsInput::Simple(s) => partial_from_simple(&s),
            };
            let mode = if *confounded {
                SamplingMode::ConfoundedMediator
            } else {
                SamplingMode::Faithful
            };
            let r = verify(&partial, *samples, *seed, mode)?;
            emit(out, cli.json, &r, render_verification(&r))?;
            if !r.passed && mode == SamplingMode::Faithful {
                return Err(Failure::Verification(format!(
                    "{} of {} sampled laws violate the partial-mediation interval, \
                     {} violate the simple interval, {} miss their margins",
                    r.violations, r.samples, r.simple_violations, r.margin_failures
                )));
            }
            Ok(())
        }
        Command::Simulate {
            law,
            n,
            seed,
            out: path,
        } => {
            let law: PotentialOutcomeLaw = serde_json::from_str(&read_file(law)?)
                .map_err(|e| BoundsError::InvalidInput(format!("{}: {e}", law.display())))?;
            let records = simulate_trial(&law, *n, *seed)?;
            let file = std::fs::File::create(path).map_err(|e| {
                BoundsError::InvalidInput(format!("cannot create {}: {e}", path.display()))
            })?;
            crate::estimate::write_records_csv(&records, file)?;
            #[derive(Serialize)]
            struct Written<'a> {
                records: usize,
                out: &'a Path,
            }
            let w = Written {
                records: records.len(),
                out: path,
            };
            let text = format!("wrote {} records to {}\n", w.records, path.display());
            emit(out, cli.json, &w, text)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
            let target: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = match &f {
                Failure::Bounds(e) => writeln!(err, "error: {e}"),
                Failure::Verification(msg) => writeln!(err, "verification failed: {msg}"),
            };
            f.exit_code()
        }
    }
}
