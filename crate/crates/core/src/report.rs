//! Report assembly and rendering.
//!
//! Human formats round scores to 2 decimals and LpW to 3 significant
//! figures; the JSON format carries full precision.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{AuditError, Result};
use crate::reliability::Coefficient;

/// `x` rounded to `n` significant figures, printed without an exponent.
pub fn sig_fixed(x: f64, n: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{:.*e}", n.saturating_sub(1), x).parse().unwrap_or(x);
    let exp = rounded.abs().log10().floor() as i64;
    let decimals = (n as i64 - 1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// `x` rounded to `n` significant figures in scientific notation.
pub fn sig_sci(x: f64, n: usize) -> String {
    format!("{:.*e}", n.saturating_sub(1), x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    /// Quality score.
    Score(f64),
    /// LpW-style metric.
    Lpw(f64),
    Joules(f64),
    Seconds(f64),
    Ratio(f64),
    Fraction(f64),
    /// Test statistic or effect size.
    Stat(f64),
    P(f64),
    Coef(Coefficient),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    fn human(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Score(v) => format!("{v:.2}"),
            Cell::Lpw(v) => sig_sci(*v, 3),
            Cell::Joules(v) => format!("{v:.1}"),
            Cell::Seconds(v) => format!("{v:.2}"),
            Cell::Ratio(v) => sig_fixed(*v, 3),
            Cell::Fraction(v) => format!("{:.1}%", v * 100.0),
            Cell::Stat(v) if *v != 0.0 && v.abs() < 0.01 => sig_sci(*v, 3),
            Cell::Stat(v) => format!("{v:.3}"),
            Cell::P(v) if *v < 0.001 => "<0.001".into(),
            Cell::P(v) => format!("{v:.3}"),
            Cell::Coef(c) => c.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn structured(&self) -> Value {
        let num = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
        match self {
            Cell::Text(s) => json!(s),
            Cell::Int(v) => json!(v),
            Cell::Score(v)
            | Cell::Lpw(v)
            | Cell::Joules(v)
            | Cell::Seconds(v)
            | Cell::Ratio(v)
            | Cell::Fraction(v)
            | Cell::Stat(v)
            | Cell::P(v) => num(*v),
            Cell::Coef(Coefficient::Defined(v)) => num(*v),
            Cell::Coef(Coefficient::Undefined) => json!("undefined"),
            Cell::Empty => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Table {
        Table {
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width must match header in {}", self.title);
        self.rows.push(row);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SectionKind {
    /// Per-trial energy accounting.
    Energy,
    /// Per-prompt quality under the primary scheme.
    Quality,
    Aggregate,
    PerCategory,
    WeightingSweep,
    RaterSweep,
    Reliability,
    Inferential,
    Barrier,
    Regime,
    Scenarios,
}

impl SectionKind {
    /// Sections selected by `all`; the per-trial sections must be named.
    pub const ALL: [SectionKind; 9] = [
        SectionKind::Aggregate,
        SectionKind::PerCategory,
        SectionKind::WeightingSweep,
        SectionKind::RaterSweep,
        SectionKind::Reliability,
        SectionKind::Inferential,
        SectionKind::Barrier,
        SectionKind::Regime,
        SectionKind::Scenarios,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SectionKind::Energy => "energy",
            SectionKind::Quality => "quality",
            SectionKind::Aggregate => "aggregate",
            SectionKind::PerCategory => "per_category",
            SectionKind::WeightingSweep => "weighting_sweep",
            SectionKind::RaterSweep => "rater_sweep",
            SectionKind::Reliability => "reliability",
            SectionKind::Inferential => "inferential",
            SectionKind::Barrier => "barrier",
            SectionKind::Regime => "regime",
            SectionKind::Scenarios => "scenarios",
        }
    }

    /// Module whose output the section presents.
    pub fn source(self) -> &'static str {
        match self {
            SectionKind::Aggregate | SectionKind::PerCategory | SectionKind::Barrier | SectionKind::Regime => {
                "metrics"
            }
            SectionKind::Energy => "energy",
            SectionKind::Quality | SectionKind::WeightingSweep | SectionKind::RaterSweep => "scoring",
            SectionKind::Reliability => "reliability",
            SectionKind::Inferential => "inferstat",
            SectionKind::Scenarios => "scenarios",
        }
    }

    pub fn needs_trials(self) -> bool {
        !matches!(self, SectionKind::Scenarios | SectionKind::Quality | SectionKind::Reliability)
    }

    pub fn needs_scores(self) -> bool {
        !matches!(self, SectionKind::Scenarios | SectionKind::Energy | SectionKind::Barrier)
    }

    /// Parses a comma-separated list; `all` selects every section.
    pub fn parse_list(s: &str) -> Result<Vec<SectionKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(SectionKind::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(AuditError::Unknown {
                kind: "section list".into(),
                name: s.into(),
            });
        }
        Ok(out)
    }
}

impl FromStr for SectionKind {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        SectionKind::ALL
            .into_iter()
            .chain([SectionKind::Energy, SectionKind::Quality])
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AuditError::Unknown {
                kind: "section".into(),
                name: s.into(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub kind: SectionKind,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditReport {
    pub generated_at: String,
    /// SHA-256 over the input bytes.
    pub fingerprint: String,
    pub sections: Vec<Section>,
    /// Net-energy clamp incidence per configuration.
    pub clamp_counts: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
    /// Set when requested sections could not be computed for lack of data.
    pub insufficient_data: bool,
}

impl AuditReport {
    pub fn section(&self, kind: SectionKind) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == kind)
    }
}

/// Hash of the given inputs in order. Each input is length-prefixed so that
/// moving bytes between inputs changes the result.
pub fn fingerprint<'a>(inputs: impl IntoIterator<Item = &'a [u8]>) -> String {
    let mut h = Sha256::new();
    for bytes in inputs {
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    h.finalize().iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" | "plain" => Ok(Format::Table),
            "csv" | "delimited" => Ok(Format::Csv),
            "json" | "structured" => Ok(Format::Json),
            _ => Err(AuditError::Unknown {
                kind: "format".into(),
                name: s.into(),
            }),
        }
    }
}

pub fn render(report: &AuditReport, format: Format) -> String {
    match format {
        Format::Table => render_table(report),
        Format::Csv => render_csv(report),
        Format::Json => render_json(report),
    }
}

fn clamp_line(report: &AuditReport) -> String {
    if report.clamp_counts.is_empty() {
        return "none".into();
    }
    report
        .clamp_counts
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn render_table(report: &AuditReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "generated_at: {}", report.generated_at);
    let _ = writeln!(out, "fingerprint: {}", report.fingerprint);
    let _ = writeln!(out, "clamped net energy: {}", clamp_line(report));
    for s in &report.sections {
        let _ = writeln!(out, "\n== {} (source: {}) ==", s.kind.as_str(), s.kind.source());
        if s.tables.is_empty() {
            let _ = writeln!(out, "(empty)");
        }
        for t in &s.tables {
            out.push('\n');
            if !t.title.is_empty() {
                let _ = writeln!(out, "{}", t.title);
            }
            let cells: Vec<Vec<String>> = t.rows.iter().map(|r| r.iter().map(Cell::human).collect()).collect();
            let mut widths: Vec<usize> = t.columns.iter().map(|c| c.chars().count()).collect();
            for r in &cells {
                for (w, c) in widths.iter_mut().zip(r) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let line = |vals: &[String]| {
                vals.iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (v, w))| if i == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .to_string()
            };
            let _ = writeln!(out, "{}", line(&t.columns));
            let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
            for r in &cells {
                let _ = writeln!(out, "{}", line(r));
            }
            for n in &t.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
    }
    if !report.warnings.is_empty() {
        let _ = writeln!(out, "\nwarnings:");
        for w in &report.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}

fn render_csv(report: &AuditReport) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let mut rec = |fields: Vec<String>| w.write_record(&fields).expect("writing to memory");
    rec(vec!["#generated_at".into(), report.generated_at.clone()]);
    rec(vec!["#fingerprint".into(), report.fingerprint.clone()]);
    rec(vec!["#clamped".into(), clamp_line(report)]);
    for s in &report.sections {
        for t in &s.tables {
            rec(vec![
                "#section".into(),
                s.kind.as_str().into(),
                s.kind.source().into(),
                t.title.clone(),
            ]);
            rec(t.columns.clone());
            for r in &t.rows {
                rec(r.iter().map(Cell::human).collect());
            }
            for n in &t.notes {
                rec(vec!["#note".into(), n.clone()]);
            }
        }
    }
    for warning in &report.warnings {
        rec(vec!["#warning".into(), warning.clone()]);
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn render_json(report: &AuditReport) -> String {
    let mut sections = Map::new();
    for s in &report.sections {
        let tables: Vec<Value> = s
            .tables
            .iter()
            .map(|t| {
                json!({
                    "title": t.title,
                    "columns": t.columns,
                    "rows": t.rows.iter().map(|r| r.iter().map(Cell::structured).collect::<Vec<_>>()).collect::<Vec<_>>(),
                    "notes": t.notes,
                })
            })
            .collect();
        sections.insert(
            s.kind.as_str().into(),
            json!({ "source": s.kind.source(), "tables": tables }),
        );
    }
    let doc = json!({
        "generated_at": report.generated_at,
        "fingerprint": report.fingerprint,
        "clamp_counts": report.clamp_counts,
        "insufficient_data": report.insufficient_data,
        "warnings": report.warnings,
        "sections": sections,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("report serialises");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_figures() {
        assert_eq!(sig_fixed(1.1168, 3), "1.12");
        assert_eq!(sig_fixed(0.049_63, 3), "0.0496");
        assert_eq!(sig_fixed(1734.7, 3), "1730");
        assert_eq!(sig_fixed(9.996, 3), "10.0");
        assert_eq!(sig_sci(2.797_96e-3, 3), "2.80e-3");
        assert_eq!(sig_sci(4.336_84, 3), "4.34e0");
    }

    #[test]
    fn fingerprint_tracks_bytes() {
        let a = fingerprint([b"abc".as_slice(), b"d".as_slice()]);
        assert_eq!(a, fingerprint([b"abc".as_slice(), b"d".as_slice()]));
        assert_ne!(a, fingerprint([b"ab".as_slice(), b"cd".as_slice()]));
        assert_ne!(a, fingerprint([b"abc".as_slice(), b"e".as_slice()]));
        assert_eq!(a.len(), 64);
    }

    fn sample() -> AuditReport {
        let mut t = Table::new("Aggregate", &["config", "q_ped", "lpw", "alpha"]);
        t.push(vec![
            Cell::text("fp16"),
            Cell::Score(8.2449),
            Cell::Lpw(2.4987e-3),
            Cell::Coef(Coefficient::Undefined),
        ]);
        AuditReport {
            generated_at: "2025-01-01T00:00:00Z".into(),
            fingerprint: fingerprint([b"x".as_slice()]),
            sections: vec![Section {
                kind: SectionKind::Aggregate,
                tables: vec![t],
            }],
            clamp_counts: BTreeMap::from([("fp16".into(), 2)]),
            warnings: vec!["2 net energies clamped".into()],
            insufficient_data: false,
        }
    }

    #[test]
    fn formats_round_consistently() {
        let r = sample();
        let table = render(&r, Format::Table);
        assert!(table.contains("8.24"));
        assert!(table.contains("2.50e-3"));
        assert!(table.contains("undefined"));
        assert!(table.contains("source: metrics"));
        let csv = render(&r, Format::Csv);
        assert!(csv.contains("fp16,8.24,2.50e-3,undefined"));
        let json: Value = serde_json::from_str(&render(&r, Format::Json)).unwrap();
        assert_eq!(json["sections"]["aggregate"]["tables"][0]["rows"][0][1], json!(8.2449));
        assert_eq!(json["sections"]["aggregate"]["source"], json!("metrics"));
        assert_eq!(render(&r, Format::Json), render(&r, Format::Json));
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        use crate::error::ErrorClass;
        assert_eq!("xml".parse::<Format>().unwrap_err().class(), ErrorClass::Usage);
        assert_eq!(SectionKind::parse_list("aggregate,bogus").unwrap_err().class(), ErrorClass::Usage);
        assert_eq!(
            SectionKind::parse_list("scenarios,aggregate").unwrap(),
            vec![SectionKind::Aggregate, SectionKind::Scenarios]
        );
    }
}
