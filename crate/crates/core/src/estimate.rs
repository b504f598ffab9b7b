//! Estimating margins from trial data.
//!
//! Stratum rates from an exposure-randomized trial are read as the
//! interventional quantities the bounds need: `P(Y*(x,m)=y)` as
//! `P(Y=y | X=x, M=m)` and `P(M(x)=m)` as `P(M=m | X=x)`. Empty strata are
//! errors, never zeros.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{BoundsError, Result};
use crate::mediation::{CompleteMediationMargins, PartialMediationMargins};
use crate::oracle::TrialRecord;
use crate::probability::{prob_from_counts, CountTable, Probability, REPORT_TOL};
use crate::simple::SimpleMargins;

/// A nonempty set of trial records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<TrialRecord>,
    source: String,
    has_mediator: bool,
}

impl Dataset {
    /// Either every record carries the mediator or none does.
    pub fn new(records: Vec<TrialRecord>, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        if records.is_empty() {
            return Err(BoundsError::InsufficientData(format!(
                "{source}: no records"
            )));
        }
        let with_m = records.iter().filter(|r| r.m.is_some()).count();
        if with_m != 0 && with_m != records.len() {
            return Err(BoundsError::InvalidInput(format!(
                "{source}: {with_m} of {} records carry a mediator value",
                records.len()
            )));
        }
        Ok(Dataset {
            has_mediator: with_m == records.len(),
            records,
            source,
        })
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn has_mediator(&self) -> bool {
        self.has_mediator
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Parses record CSV with header `x,m,y` or `x,y`.
    pub fn from_csv<R: Read>(reader: R, source: impl Into<String>) -> Result<Self> {
        let source = source.into();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let parse_err =
            |line: u64, msg: String| BoundsError::InvalidInput(format!("{source}:{line}: {msg}"));

        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let cols: Vec<&str> = headers.iter().collect();
        let with_m = match cols.as_slice() {
            ["x", "m", "y"] => true,
            ["x", "y"] => false,
            _ => {
                return Err(parse_err(
                    1,
                    format!(
                        "expected header `x,m,y` or `x,y`, found `{}`",
                        cols.join(",")
                    ),
                ))
            }
        };

        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line());
            let flag = |i: usize| match row.get(i) {
                Some("0") => Ok(false),
                Some("1") => Ok(true),
                Some(other) => Err(parse_err(line, format!("expected 0 or 1, found `{other}`"))),
                None => Err(parse_err(line, "missing field".to_string())),
            };
            let record = if with_m {
                TrialRecord::new(flag(0)?, Some(flag(1)?), flag(2)?)
            } else {
                TrialRecord::new(flag(0)?, None, flag(1)?)
            };
            records.push(record);
        }
        Dataset::new(records, source)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| {
            BoundsError::InvalidInput(format!("cannot open {}: {e}", path.display()))
        })?;
        Dataset::from_csv(std::io::BufReader::new(file), path.display().to_string())
    }
}

/// Writes records as CSV; the header is `x,m,y` when every record carries the
/// mediator and `x,y` otherwise.
pub fn write_records_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let io = |e: std::io::Error| BoundsError::InvalidInput(format!("write failed: {e}"));
    let with_m = !records.is_empty() && records.iter().all(|r| r.m.is_some());
    let mut out = std::io::BufWriter::new(out);
    let b = |v: bool| if v { '1' } else { '0' };
    if with_m {
        writeln!(out, "x,m,y").map_err(io)?;
        for r in records {
            writeln!(out, "{},{},{}", b(r.x), b(r.m.unwrap_or(false)), b(r.y)).map_err(io)?;
        }
    } else {
        writeln!(out, "x,y").map_err(io)?;
        for r in records {
            writeln!(out, "{},{}", b(r.x), b(r.y)).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// `[x][m][y]` counts; records without a mediator are tallied under `m = 0`
/// and only used for arm totals.
#[derive(Debug, Default, Clone, Copy)]
struct Tally {
    cells: [[[u64; 2]; 2]; 2],
}

impl Tally {
    fn of(d: &Dataset) -> Self {
        let mut t = Tally::default();
        for r in d.records() {
            t.cells[r.x as usize][r.m.unwrap_or(false) as usize][r.y as usize] += 1;
        }
        t
    }

    fn arm(&self, x: usize) -> (u64, u64) {
        let events = self.cells[x][0][1] + self.cells[x][1][1];
        let total = events + self.cells[x][0][0] + self.cells[x][1][0];
        (events, total)
    }

    fn stratum(&self, x: usize, m: usize) -> (u64, u64) {
        let c = self.cells[x][m];
        (c[1], c[0] + c[1])
    }

    fn mediator_in_arm(&self, x: usize) -> (u64, u64) {
        let ones = self.cells[x][1][0] + self.cells[x][1][1];
        (ones, self.arm(x).1)
    }

    fn pooled_stratum(&self, m: usize) -> (u64, u64) {
        let (e0, n0) = self.stratum(0, m);
        let (e1, n1) = self.stratum(1, m);
        (e0 + e1, n0 + n1)
    }
}

fn rate(events: u64, total: u64, what: impl FnOnce() -> String) -> Result<Probability> {
    if total == 0 {
        return Err(BoundsError::InsufficientData(format!(
            "{} has no records",
            what()
        )));
    }
    prob_from_counts(events, total)
}

fn require_mediator(d: &Dataset) -> Result<()> {
    if d.has_mediator() {
        Ok(())
    } else {
        Err(BoundsError::InsufficientData(format!(
            "{}: records carry no mediator column",
            d.source()
        )))
    }
}

pub fn estimate_simple(d: &Dataset) -> Result<SimpleMargins> {
    let t = Tally::of(d);
    let arm = |x: usize| {
        let (e, n) = t.arm(x);
        rate(e, n, || format!("arm x={x}"))
    };
    Ok(SimpleMargins {
        p1: arm(1)?,
        p0: arm(0)?,
    })
}

pub fn estimate_partial(d: &Dataset) -> Result<PartialMediationMargins> {
    require_mediator(d)?;
    let t = Tally::of(d);
    let y = |x: usize, m: usize| {
        let (e, n) = t.stratum(x, m);
        rate(e, n, || format!("stratum (x={x}, m={m})"))
    };
    let m = |x: usize| {
        let (e, n) = t.mediator_in_arm(x);
        rate(e, n, || format!("arm x={x}"))
    };
    // Arms first so a missing arm is reported as such.
    let (m0, m1) = (m(0)?, m(1)?);
    Ok(PartialMediationMargins {
        y00: y(0, 0)?,
        y01: y(0, 1)?,
        y10: y(1, 0)?,
        y11: y(1, 1)?,
        m0,
        m1,
    })
}

/// Complete-mediation margins plus any warnings about the Markov property
/// `Y independent of X given M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompleteEstimate {
    pub margins: CompleteMediationMargins,
    pub warnings: Vec<String>,
}

pub fn estimate_complete(d: &Dataset) -> Result<CompleteEstimate> {
    require_mediator(d)?;
    let t = Tally::of(d);
    let arm_m = |x: usize| {
        let (e, n) = t.mediator_in_arm(x);
        rate(e, n, || format!("arm x={x}"))
    };
    let pooled = |m: usize| {
        let (e, n) = t.pooled_stratum(m);
        rate(e, n, || format!("mediator stratum m={m}"))
    };
    let margins = CompleteMediationMargins {
        a: arm_m(0)?.complement(),
        b: arm_m(1)?,
        c: pooled(0)?.complement(),
        d: pooled(1)?,
    };

    let mut warnings = Vec::new();
    for m in 0..2 {
        let (e0, n0) = t.stratum(0, m);
        let (e1, n1) = t.stratum(1, m);
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let (r0, r1) = (e0 as f64 / n0 as f64, e1 as f64 / n1 as f64);
        let pooled_rate = (e0 + e1) as f64 / (n0 + n1) as f64;
        let se = (pooled_rate * (1.0 - pooled_rate) * (1.0 / n0 as f64 + 1.0 / n1 as f64)).sqrt();
        let gap = (r1 - r0).abs();
        if gap > REPORT_TOL + 3.0 * se {
            warnings.push(format!(
                "P(Y=1|X=1,M={m}) = {r1:.4} but P(Y=1|X=0,M={m}) = {r0:.4}; \
                 Y independent of X given M looks violated"
            ));
        }
    }
    Ok(CompleteEstimate { margins, warnings })
}

pub fn margins_from_count_table(t: &CountTable) -> Result<SimpleMargins> {
    Ok(SimpleMargins {
        p1: prob_from_counts(t.exposed_event, t.exposed_total)?,
        p0: prob_from_counts(t.unexposed_event, t.unexposed_total)?,
    })
}

/// Any of the three margin file layouts, told apart by their keys.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MarginsInput {
    Simple(SimpleMargins),
    Complete(CompleteMediationMargins),
    Partial(PartialMediationMargins),
}

impl MarginsInput {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| BoundsError::InvalidInput(format!("margins JSON: {e}")))?;
        let obj = value.as_object().ok_or_else(|| {
            BoundsError::InvalidInput("margins JSON must be an object".to_string())
        })?;
        let decode = |e: serde_json::Error| BoundsError::InvalidInput(format!("margins JSON: {e}"));
        if obj.contains_key("y00") || obj.contains_key("m0") {
            serde_json::from_value(value)
                .map(MarginsInput::Partial)
                .map_err(decode)
        } else if obj.contains_key("a") {
            serde_json::from_value(value)
                .map(MarginsInput::Complete)
                .map_err(decode)
        } else if obj.contains_key("p1") {
            serde_json::from_value(value)
                .map(MarginsInput::Simple)
                .map_err(decode)
        } else {
            Err(BoundsError::InvalidInput(
                "margins JSON needs fields p1,p0 or a,b,c,d or y00,y01,y10,y11,m0,m1".to_string(),
            ))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MarginsInput::Simple(_) => "simple",
            MarginsInput::Complete(_) => "complete",
            MarginsInput::Partial(_) => "partial",
        }
    }
}

pub fn count_table_from_json_str(text: &str) -> Result<CountTable> {
    serde_json::from_str(text).map_err(|e| BoundsError::InvalidInput(format!("count JSON: {e}")))
}

/// Raw record-based view used by reports.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecordsSummary {
    pub source: String,
    pub records: usize,
    pub has_mediator: bool,
}

impl From<&Dataset> for RecordsSummary {
    fn from(d: &Dataset) -> Self {
        RecordsSummary {
            source: d.source().to_string(),
            records: d.len(),
            has_mediator: d.has_mediator(),
        }
    }
}
