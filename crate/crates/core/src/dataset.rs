//! Canonical data model and CSV ingestion for trial telemetry and rater scores.
//!
//! Trial files use the header
//! `prompt_id,category,latency_s,e_start_kwh,e_end_kwh,gross_j,net_j,co2_kg`
//! (energy columns individually optional, an opaque `prompt` column is
//! accepted), score files use `prompt_id,rater_id,rater_type,CA,CC,SQ,LA`.
//! Row numbers in diagnostics count data rows from 1, excluding the header.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Mathematics,
    Science,
    #[serde(rename = "Programming-CS")]
    ProgrammingCs,
    Humanities,
    #[serde(rename = "Meta-cognition")]
    MetaCognition,
}

impl Category {
    /// Canonical reporting order.
    pub const ALL: [Category; 5] = [
        Category::Mathematics,
        Category::Science,
        Category::ProgrammingCs,
        Category::Humanities,
        Category::MetaCognition,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Mathematics => "Mathematics",
            Category::Science => "Science",
            Category::ProgrammingCs => "Programming-CS",
            Category::Humanities => "Humanities",
            Category::MetaCognition => "Meta-cognition",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let s = s.trim();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Fp16,
    Nf4,
    Q4KM,
    F16,
    Other(String),
}

impl Precision {
    pub fn parse(s: &str) -> Precision {
        match s.trim().to_ascii_uppercase().as_str() {
            "FP16" => Precision::Fp16,
            "NF4" => Precision::Nf4,
            "Q4_K_M" => Precision::Q4KM,
            "F16" => Precision::F16,
            _ => Precision::Other(s.trim().to_string()),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Precision::Fp16 => f.write_str("FP16"),
            Precision::Nf4 => f.write_str("NF4"),
            Precision::Q4KM => f.write_str("Q4_K_M"),
            Precision::F16 => f.write_str("F16"),
            Precision::Other(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CacheRegime {
    CacheOn,
    CacheOff,
    NotApplicable,
}

impl CacheRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            CacheRegime::CacheOn => "cache_on",
            CacheRegime::CacheOff => "cache_off",
            CacheRegime::NotApplicable => "not_applicable",
        }
    }
}

impl FromStr for CacheRegime {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cache_on" | "on" => Ok(CacheRegime::CacheOn),
            "cache_off" | "off" => Ok(CacheRegime::CacheOff),
            "not_applicable" | "n/a" => Ok(CacheRegime::NotApplicable),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterType {
    Human,
    Ai,
}

impl RaterType {
    pub fn as_str(self) -> &'static str {
        match self {
            RaterType::Human => "human",
            RaterType::Ai => "ai",
        }
    }
}

impl FromStr for RaterType {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" => Ok(RaterType::Human),
            "ai" => Ok(RaterType::Ai),
            _ => Err(()),
        }
    }
}

/// Rubric dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    /// Conceptual accuracy.
    CA,
    /// Clarity and coherence.
    CC,
    /// Scaffolding quality.
    SQ,
    /// Level appropriateness.
    LA,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [Dimension::CA, Dimension::CC, Dimension::SQ, Dimension::LA];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::CA => "CA",
            Dimension::CC => "CC",
            Dimension::SQ => "SQ",
            Dimension::LA => "LA",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One inference event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config_id: String,
    pub prompt_id: u32,
    pub category: Category,
    pub latency_s: f64,
    pub e_start_kwh: Option<f64>,
    pub e_end_kwh: Option<f64>,
    pub gross_j: Option<f64>,
    pub net_j: Option<f64>,
    /// Tracker-reported emissions, carried through untouched.
    pub co2_kg: Option<f64>,
    pub prompt: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigDescriptor {
    pub config_id: String,
    pub precision: Precision,
    pub cache_regime: CacheRegime,
    pub hardware: String,
    pub idle_power_w: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub prompt_id: u32,
    pub rater_id: String,
    pub rater_type: RaterType,
    pub dimension: Dimension,
    pub score: Option<u8>,
}

/// Ratings for one configuration, indexed by prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    config_id: String,
    entries: Vec<ScoreEntry>,
    by_prompt: BTreeMap<u32, Vec<usize>>,
    raters: BTreeMap<String, RaterType>,
}

impl ScoreMatrix {
    /// Validates ranges, `(prompt, rater, dimension)` uniqueness and that each
    /// rater carries a single rater type.
    pub fn new(config_id: impl Into<String>, entries: Vec<ScoreEntry>) -> Result<Self> {
        let mut by_prompt: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        let mut raters: BTreeMap<String, RaterType> = BTreeMap::new();
        let mut seen = BTreeSet::new();
        let mut dups = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(s) = e.score {
                if !(1..=10).contains(&s) {
                    return Err(AuditError::ScoreRange {
                        row: i + 1,
                        column: e.dimension.to_string(),
                        value: s.to_string(),
                        rater: Some(e.rater_id.clone()),
                    });
                }
            }
            match raters.get(&e.rater_id) {
                Some(t) if *t != e.rater_type => {
                    return Err(AuditError::Enumeration {
                        row: i + 1,
                        field: "rater_type".into(),
                        value: format!("{} (rater {} already {})", e.rater_type.as_str(), e.rater_id, t.as_str()),
                    })
                }
                Some(_) => {}
                None => {
                    raters.insert(e.rater_id.clone(), e.rater_type);
                }
            }
            if !seen.insert((e.prompt_id, e.rater_id.clone(), e.dimension)) {
                dups.insert(format!("prompt {} rater {} {}", e.prompt_id, e.rater_id, e.dimension));
            }
            by_prompt.entry(e.prompt_id).or_default().push(i);
        }
        if !dups.is_empty() {
            return Err(AuditError::Duplicate {
                what: "score triple".into(),
                ids: dups.into_iter().collect(),
            });
        }
        Ok(ScoreMatrix {
            config_id: config_id.into(),
            entries,
            by_prompt,
            raters,
        })
    }

    pub fn config_id(&self) -> &str {
        &self.config_id
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn prompt_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.by_prompt.keys().copied()
    }

    pub fn entries_for(&self, prompt_id: u32) -> impl Iterator<Item = &ScoreEntry> {
        self.by_prompt
            .get(&prompt_id)
            .into_iter()
            .flatten()
            .map(move |&i| &self.entries[i])
    }

    /// Raters in id order with their type.
    pub fn raters(&self) -> impl Iterator<Item = (&str, RaterType)> {
        self.raters.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn rater_type(&self, rater_id: &str) -> Option<RaterType> {
        self.raters.get(rater_id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Everything an audit consumes, keyed by `config_id`.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub configs: BTreeMap<String, ConfigDescriptor>,
    pub trials: BTreeMap<String, Vec<TrialRecord>>,
    pub scores: BTreeMap<String, ScoreMatrix>,
}

impl Dataset {
    pub fn add_config(&mut self, c: ConfigDescriptor) -> Result<()> {
        if self.configs.contains_key(&c.config_id) {
            return Err(AuditError::Duplicate {
                what: "config_id".into(),
                ids: vec![c.config_id],
            });
        }
        if !(c.idle_power_w >= 0.0) {
            return Err(AuditError::domain(format!(
                "config {}: idle_power_w must be >= 0, got {}",
                c.config_id, c.idle_power_w
            )));
        }
        self.configs.insert(c.config_id.clone(), c);
        Ok(())
    }

    /// Checks that every trial and score set refers to a known configuration.
    pub fn validate(&self) -> Result<()> {
        for id in self.trials.keys().chain(self.scores.keys()) {
            if !self.configs.contains_key(id) {
                return Err(AuditError::Unknown {
                    kind: "config_id".into(),
                    name: id.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.trials.values().all(Vec::is_empty) && self.scores.values().all(ScoreMatrix::is_empty)
    }
}

/// Renames input headers to canonical names before schema checks.
#[derive(Debug, Clone, Default)]
pub struct HeaderMap {
    renames: HashMap<String, String>,
}

impl HeaderMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rename(mut self, from: impl Into<String>, to: impl Into<String>) -> Self {
        self.renames.insert(from.into(), to.into());
        self
    }

    /// Parses `from=to` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut map = HeaderMap::new();
        for p in pairs {
            let (from, to) = p.split_once('=').ok_or_else(|| {
                AuditError::domain(format!("header mapping `{p}` is not of the form from=to"))
            })?;
            map = map.rename(from.trim(), to.trim());
        }
        Ok(map)
    }

    fn apply<'a>(&'a self, h: &'a str) -> &'a str {
        self.renames.get(h).map(String::as_str).unwrap_or(h)
    }
}

fn edit_distance(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

struct Columns {
    index: HashMap<String, usize>,
}

impl Columns {
    fn new(headers: &csv::StringRecord, map: &HeaderMap) -> Self {
        let index = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (map.apply(h.trim()).to_string(), i))
            .collect();
        Columns { index }
    }

    fn has(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| AuditError::MissingColumn {
                column: name.into(),
                near: self.closest(name),
            })
    }

    /// A present header within edit distance 2 of `name`.
    fn closest(&self, name: &str) -> Option<String> {
        let mut candidates: Vec<(usize, &String)> = self
            .index
            .keys()
            .map(|h| (edit_distance(h, name), h))
            .filter(|(d, _)| *d <= 2)
            .collect();
        candidates.sort();
        candidates.first().map(|(_, h)| (*h).clone())
    }

    fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn cell(rec: &csv::StringRecord, idx: Option<usize>) -> Option<&str> {
    idx.and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty())
}

fn parse_f64(row: usize, column: &str, s: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(AuditError::Parse {
            row,
            column: column.into(),
            message: format!("`{s}` is not a finite number"),
        }),
    }
}

fn parse_prompt_id(row: usize, s: Option<&str>) -> Result<u32> {
    let s = s.ok_or_else(|| AuditError::Parse {
        row,
        column: "prompt_id".into(),
        message: "empty".into(),
    })?;
    match s.parse::<u32>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(AuditError::Parse {
            row,
            column: "prompt_id".into(),
            message: format!("`{s}` is not a positive integer"),
        }),
    }
}

fn csv_reader<R: Read>(rdr: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(rdr)
}

fn csv_err(row: usize, e: csv::Error) -> AuditError {
    AuditError::Parse {
        row,
        column: "*".into(),
        message: e.to_string(),
    }
}

const TRIAL_ENERGY_COLUMNS: &str = "e_start_kwh+e_end_kwh | gross_j | net_j";

/// Reads trial rows for `config_id` from any reader.
pub fn read_trials<R: Read>(rdr: R, config_id: &str, map: &HeaderMap) -> Result<Vec<TrialRecord>> {
    read_trials_inner(rdr, config_id, map, true)
}

/// Like [`read_trials`] but accepts files without energy columns, for trials
/// whose energy snapshots come from a tracker log.
pub fn read_trial_timings<R: Read>(rdr: R, config_id: &str, map: &HeaderMap) -> Result<Vec<TrialRecord>> {
    read_trials_inner(rdr, config_id, map, false)
}

fn read_trials_inner<R: Read>(rdr: R, config_id: &str, map: &HeaderMap, require_energy: bool) -> Result<Vec<TrialRecord>> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
    let cols = Columns::new(&headers, map);

    let i_prompt = cols.require("prompt_id")?;
    let i_cat = cols.require("category")?;
    let i_lat = cols.require("latency_s")?;
    let has_snap_start = cols.has("e_start_kwh");
    let has_snap_end = cols.has("e_end_kwh");
    if has_snap_start != has_snap_end {
        let missing = if has_snap_start { "e_end_kwh" } else { "e_start_kwh" };
        if require_energy && !cols.has("gross_j") && !cols.has("net_j") {
            return Err(AuditError::MissingColumn {
                column: missing.into(),
                near: None,
            });
        }
    }
    if require_energy && !(has_snap_start && has_snap_end) && !cols.has("gross_j") && !cols.has("net_j") {
        return Err(AuditError::MissingColumn {
            column: TRIAL_ENERGY_COLUMNS.into(),
            near: None,
        });
    }
    let (i_start, i_end) = if has_snap_start && has_snap_end {
        (cols.get("e_start_kwh"), cols.get("e_end_kwh"))
    } else {
        (None, None)
    };
    let i_gross = cols.get("gross_j");
    let i_net = cols.get("net_j");
    let i_co2 = cols.get("co2_kg");
    let i_text = cols.get("prompt");

    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| csv_err(row, e))?;
        let prompt_id = parse_prompt_id(row, cell(&rec, Some(i_prompt)))?;
        let cat_s = cell(&rec, Some(i_cat)).unwrap_or("");
        let category = cat_s.parse::<Category>().map_err(|_| AuditError::Enumeration {
            row,
            field: "category".into(),
            value: cat_s.into(),
        })?;
        let latency_s = match cell(&rec, Some(i_lat)) {
            Some(s) => parse_f64(row, "latency_s", s)?,
            None => {
                return Err(AuditError::Parse {
                    row,
                    column: "latency_s".into(),
                    message: "empty".into(),
                })
            }
        };
        if latency_s <= 0.0 {
            return Err(AuditError::Parse {
                row,
                column: "latency_s".into(),
                message: format!("latency must be > 0, got {latency_s}"),
            });
        }
        let opt = |idx: Option<usize>, name: &str| -> Result<Option<f64>> {
            cell(&rec, idx).map(|s| parse_f64(row, name, s)).transpose()
        };
        let e_start_kwh = opt(i_start, "e_start_kwh")?;
        let e_end_kwh = opt(i_end, "e_end_kwh")?;
        if let (Some(a), Some(b)) = (e_start_kwh, e_end_kwh) {
            if b < a {
                return Err(AuditError::Parse {
                    row,
                    column: "e_end_kwh".into(),
                    message: format!("e_end_kwh {b} is below e_start_kwh {a}"),
                });
            }
        }
        for (v, name) in [(e_start_kwh, "e_start_kwh"), (e_end_kwh, "e_end_kwh")] {
            if matches!(v, Some(x) if x < 0.0) {
                return Err(AuditError::Parse {
                    row,
                    column: name.into(),
                    message: "energy snapshot must be >= 0".into(),
                });
            }
        }
        out.push(TrialRecord {
            config_id: config_id.to_string(),
            prompt_id,
            category,
            latency_s,
            e_start_kwh,
            e_end_kwh,
            gross_j: opt(i_gross, "gross_j")?,
            net_j: opt(i_net, "net_j")?,
            co2_kg: opt(i_co2, "co2_kg")?,
            prompt: cell(&rec, i_text).map(str::to_string),
        });
    }

    let mut seen = BTreeSet::new();
    let dups: BTreeSet<u32> = out
        .iter()
        .filter(|t| !seen.insert(t.prompt_id))
        .map(|t| t.prompt_id)
        .collect();
    if !dups.is_empty() {
        return Err(AuditError::Duplicate {
            what: format!("prompt_id in config {config_id}"),
            ids: dups.iter().map(u32::to_string).collect(),
        });
    }
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| AuditError::io(path, e))
}

pub fn ingest_trials(path: impl AsRef<Path>, config_id: &str) -> Result<Vec<TrialRecord>> {
    ingest_trials_mapped(path, config_id, &HeaderMap::default())
}

pub fn ingest_trials_mapped(
    path: impl AsRef<Path>,
    config_id: &str,
    map: &HeaderMap,
) -> Result<Vec<TrialRecord>> {
    read_trials(open(path.as_ref())?, config_id, map)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes trials in the canonical schema. The `prompt` column is emitted
/// only when at least one trial carries text.
pub fn write_trials<W: Write>(trials: &[TrialRecord], w: W) -> Result<()> {
    let with_text = trials.iter().any(|t| t.prompt.is_some());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![
        "prompt_id",
        "category",
        "latency_s",
        "e_start_kwh",
        "e_end_kwh",
        "gross_j",
        "net_j",
        "co2_kg",
    ];
    if with_text {
        header.push("prompt");
    }
    let werr = |e: csv::Error| AuditError::domain(format!("csv write failed: {e}"));
    wtr.write_record(&header).map_err(werr)?;
    for t in trials {
        let mut rec = vec![
            t.prompt_id.to_string(),
            t.category.to_string(),
            t.latency_s.to_string(),
            fmt_opt(t.e_start_kwh),
            fmt_opt(t.e_end_kwh),
            fmt_opt(t.gross_j),
            fmt_opt(t.net_j),
            fmt_opt(t.co2_kg),
        ];
        if with_text {
            rec.push(t.prompt.clone().unwrap_or_default());
        }
        wtr.write_record(&rec).map_err(werr)?;
    }
    wtr.flush().map_err(|e| AuditError::domain(format!("csv write failed: {e}")))?;
    Ok(())
}

fn parse_score(row: usize, column: &str, rater: &str, s: Option<&str>) -> Result<Option<u8>> {
    let Some(s) = s else { return Ok(None) };
    if !s.bytes().all(|b| b.is_ascii_digit()) {
        let message = if s.parse::<f64>().is_ok() {
            format!("score `{s}` is not an integer")
        } else {
            format!("score `{s}` is not a number")
        };
        return Err(AuditError::Parse {
            row,
            column: column.into(),
            message,
        });
    }
    match s.parse::<u32>() {
        Ok(v @ 1..=10) => Ok(Some(v as u8)),
        _ => Err(AuditError::ScoreRange {
            row,
            column: column.into(),
            value: s.into(),
            rater: Some(rater.into()),
        }),
    }
}

pub fn read_scores<R: Read>(rdr: R, config_id: &str, map: &HeaderMap) -> Result<ScoreMatrix> {
    let mut rdr = csv_reader(rdr);
    let headers = rdr.headers().map_err(|e| csv_err(0, e))?.clone();
    let cols = Columns::new(&headers, map);
    let i_prompt = cols.require("prompt_id")?;
    let i_rater = cols.require("rater_id")?;
    let i_type = cols.require("rater_type")?;
    let dim_idx = Dimension::ALL.map(|d| cols.require(d.as_str()));
    let dim_idx = {
        let mut out = [0usize; 4];
        for (o, r) in out.iter_mut().zip(dim_idx) {
            *o = r?;
        }
        out
    };

    let mut entries = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| csv_err(row, e))?;
        let prompt_id = parse_prompt_id(row, cell(&rec, Some(i_prompt)))?;
        let rater_id = cell(&rec, Some(i_rater))
            .ok_or_else(|| AuditError::Parse {
                row,
                column: "rater_id".into(),
                message: "empty".into(),
            })?
            .to_string();
        let type_s = cell(&rec, Some(i_type)).unwrap_or("");
        let rater_type = type_s.parse::<RaterType>().map_err(|_| AuditError::Enumeration {
            row,
            field: "rater_type".into(),
            value: type_s.into(),
        })?;
        for (d, &idx) in Dimension::ALL.iter().zip(&dim_idx) {
            let score = parse_score(row, d.as_str(), &rater_id, cell(&rec, Some(idx)))?;
            entries.push(ScoreEntry {
                prompt_id,
                rater_id: rater_id.clone(),
                rater_type,
                dimension: *d,
                score,
            });
        }
    }
    ScoreMatrix::new(config_id, entries)
}

pub fn ingest_scores(path: impl AsRef<Path>, config_id: &str) -> Result<ScoreMatrix> {
    ingest_scores_mapped(path, config_id, &HeaderMap::default())
}

pub fn ingest_scores_mapped(path: impl AsRef<Path>, config_id: &str, map: &HeaderMap) -> Result<ScoreMatrix> {
    read_scores(open(path.as_ref())?, config_id, map)
}

/// Writes one row per `(prompt, rater)` in prompt then rater order.
pub fn write_scores<W: Write>(scores: &ScoreMatrix, w: W) -> Result<()> {
    type Row = (RaterType, [Option<u8>; 4]);
    let mut rows: BTreeMap<(u32, &str), Row> = BTreeMap::new();
    for e in scores.entries() {
        let r = rows
            .entry((e.prompt_id, e.rater_id.as_str()))
            .or_insert((e.rater_type, [None; 4]));
        r.1[e.dimension.index()] = e.score;
    }
    let werr = |e: csv::Error| AuditError::domain(format!("csv write failed: {e}"));
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["prompt_id", "rater_id", "rater_type", "CA", "CC", "SQ", "LA"])
        .map_err(werr)?;
    for ((pid, rater), (rt, s)) in rows {
        let mut rec = vec![pid.to_string(), rater.to_string(), rt.as_str().to_string()];
        rec.extend(s.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        wtr.write_record(&rec).map_err(werr)?;
    }
    wtr.flush().map_err(|e| AuditError::domain(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Anything that belongs to a prompt.
pub trait PromptKeyed {
    fn prompt_id(&self) -> u32;
}

impl PromptKeyed for TrialRecord {
    fn prompt_id(&self) -> u32 {
        self.prompt_id
    }
}

/// Result of matching two trial slices on `prompt_id`.
#[derive(Debug, Clone)]
pub struct Paired<'a, T> {
    /// Ascending by prompt id.
    pub pairs: Vec<(&'a T, &'a T)>,
    pub unpaired_a: Vec<u32>,
    pub unpaired_b: Vec<u32>,
}

impl<T> Paired<'_, T> {
    pub fn unpaired_count(&self) -> usize {
        self.unpaired_a.len() + self.unpaired_b.len()
    }
}

pub fn join_paired<'a, T: PromptKeyed>(a: &'a [T], b: &'a [T]) -> Result<Paired<'a, T>> {
    let bmap: BTreeMap<u32, &T> = b.iter().map(|t| (t.prompt_id(), t)).collect();
    let amap: BTreeMap<u32, &T> = a.iter().map(|t| (t.prompt_id(), t)).collect();
    let pairs: Vec<(&T, &T)> = amap
        .iter()
        .filter_map(|(id, ta)| bmap.get(id).map(|tb| (*ta, *tb)))
        .collect();
    if pairs.is_empty() {
        return Err(AuditError::Pairing(format!(
            "no prompt_id shared between the two slices ({} vs {} trials)",
            a.len(),
            b.len()
        )));
    }
    let unpaired_a = amap.keys().filter(|id| !bmap.contains_key(id)).copied().collect();
    let unpaired_b = bmap.keys().filter(|id| !amap.contains_key(id)).copied().collect();
    Ok(Paired {
        pairs,
        unpaired_a,
        unpaired_b,
    })
}
