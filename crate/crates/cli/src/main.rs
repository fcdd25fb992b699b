use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Args, Parser, Subcommand};

use lpw_core::audit::{run_audit, AuditInputs, AuditOptions, LaptopComparison};
use lpw_core::config::{parse_config, RunSettings};
use lpw_core::dataset::{read_scores, read_trial_timings, read_trials, CacheRegime, ConfigDescriptor, HeaderMap, Precision};
use lpw_core::report::{fingerprint, render, Format, SectionKind};
use lpw_core::scenarios::cloud_presets;
use lpw_core::scoring::AggregationScheme;
use lpw_core::tracker::{attach_snapshots, read_tracker_log, snapshot_pairs};
use lpw_core::{AuditError, ErrorClass};

/// Exit status for command-line usage errors.
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "lpw-audit",
    version,
    about = "Audit energy, latency and pedagogical quality of local inference configurations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check input files against their schemas without running any analysis
    Validate(ValidateArgs),
    /// Run the full pipeline and render the selected report sections
    Audit(RunArgs),
    /// Per-trial gross and net energy
    Energy(RunArgs),
    /// Per-prompt quality and the weighting and rater-aggregation sweeps
    Scores(RunArgs),
    /// Krippendorff's alpha, ICC(2,1), human-AI correlation and rater severity
    Reliability(RunArgs),
    /// Aggregate means and paired tests between two configurations
    Compare(RunArgs),
    /// Latency threshold exceedance and battery budgets
    Barrier(RunArgs),
    /// Cloud and laptop scenario models (no dataset needed)
    Scenarios(RunArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Trial CSV as ID=PATH (the id defaults to the file stem)
    #[arg(long, value_name = "ID=PATH", num_args = 1..)]
    trials: Vec<String>,
    /// Score CSV as ID=PATH
    #[arg(long, value_name = "ID=PATH", num_args = 1..)]
    scores: Vec<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Trial CSV as ID=PATH (the id defaults to the file stem)
    #[arg(long, value_name = "ID=PATH", num_args = 1..)]
    trials: Vec<String>,
    /// Score CSV as ID=PATH
    #[arg(long, value_name = "ID=PATH", num_args = 1..)]
    scores: Vec<String>,
    /// Emissions-tracker log as ID=PATH, supplying energy snapshots for that configuration's trials
    #[arg(long, value_name = "ID=PATH", num_args = 1..)]
    tracker: Vec<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Aggregation schemes; the first drives quality and metrics, all of them form the weighting sweep
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    scheme: Vec<String>,
    /// Latency thresholds in seconds
    #[arg(long, value_name = "LIST")]
    thresholds: Option<String>,
    #[arg(long)]
    battery_wh: Option<f64>,
    #[arg(long)]
    clamp_floor_j: Option<f64>,
    /// table, csv or json
    #[arg(long, default_value = "table")]
    format: String,
    /// Comma-separated section names or `all`
    #[arg(long)]
    sections: Option<String>,
    /// Timestamp recorded in the report instead of the current time (RFC 3339)
    #[arg(long, value_name = "ISO8601")]
    fixed_time: Option<String>,
    /// Configurations to compare as A,B (differences are A - B)
    #[arg(long, value_name = "A,B")]
    compare: Option<String>,
    /// Cloud scenarios to evaluate, by name (default: all)
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    scenario: Vec<String>,
    /// Full-precision and quantised laptop latencies as FULL,QUANT seconds
    #[arg(long, value_name = "FULL,QUANT")]
    laptop_latencies: Option<String>,
    /// Quantised over full-precision quality for the laptop comparison
    #[arg(long, default_value_t = 1.0)]
    quality_ratio: f64,
    /// Device power for illustrative laptop energies
    #[arg(long)]
    assumed_power_w: Option<f64>,
    /// Write the report here instead of stdout
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn fail(e: &AuditError) -> ExitCode {
    let class = e.class();
    eprintln!("lpw-audit: error [{}]: {e}", class.as_str());
    ExitCode::from(class.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Validate(a) => return validate(&a),
        Cmd::Audit(a) => run(&a, None),
        Cmd::Energy(a) => run(&a, Some(vec![SectionKind::Energy])),
        Cmd::Scores(a) => run(
            &a,
            Some(vec![SectionKind::Quality, SectionKind::WeightingSweep, SectionKind::RaterSweep]),
        ),
        Cmd::Reliability(a) => run(&a, Some(vec![SectionKind::Reliability])),
        Cmd::Compare(a) => run(&a, Some(vec![SectionKind::Aggregate, SectionKind::Inferential])),
        Cmd::Barrier(a) => run(&a, Some(vec![SectionKind::Barrier])),
        Cmd::Scenarios(a) => run(&a, Some(vec![SectionKind::Scenarios])),
    };
    match result {
        Ok(code) => code,
        Err(e) => fail(&e),
    }
}

/// Splits `ID=PATH`; without an id the file stem is used.
fn split_spec(spec: &str) -> (String, PathBuf) {
    if let Some((id, path)) = spec.split_once('=') {
        if !id.is_empty() && !id.contains(['/', '\\']) {
            return (id.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(spec);
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    (id, path)
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, AuditError> {
    std::fs::read(path).map_err(|source| AuditError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn usage(msg: impl Into<String>) -> AuditError {
    AuditError::Domain(msg.into())
}

fn number_list(flag: &str, s: &str) -> Result<Vec<f64>, AuditError> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--{flag}: `{p}` is not a number")))
        })
        .collect()
}

fn validate(a: &ValidateArgs) -> ExitCode {
    if a.trials.is_empty() && a.scores.is_empty() && a.config.is_none() {
        eprintln!("lpw-audit: validate needs at least one of --trials, --scores, --config");
        return ExitCode::from(EXIT_USAGE);
    }
    let mut first_failure: Option<ErrorClass> = None;
    let mut report = |kind: &str, path: &Path, r: Result<String, AuditError>| match r {
        Ok(detail) => println!("PASS {kind} {}: {detail}", path.display()),
        Err(e) => {
            println!("FAIL {kind} {}: [{}] {e}", path.display(), e.class().as_str());
            first_failure.get_or_insert(e.class());
        }
    };

    let mut map = HeaderMap::new();
    if let Some(p) = &a.config {
        let r = read_bytes(p).and_then(|b| {
            let text = String::from_utf8(b).map_err(|_| usage("config file is not UTF-8"))?;
            parse_config(&text)
        });
        let r = r.map(|s| {
            for (from, to) in &s.column_map {
                map = std::mem::take(&mut map).rename(from, to);
            }
            format!("{} configuration(s), {} scheme(s), {} scenario(s)", s.configs.len(), s.schemes.len(), s.scenarios.len())
        });
        report("config", p, r);
    }
    for spec in &a.trials {
        let (id, path) = split_spec(spec);
        let r = read_bytes(&path)
            .and_then(|b| read_trials(b.as_slice(), &id, &map))
            .map(|t| format!("{} trial(s) for {id}", t.len()));
        report("trials", &path, r);
    }
    for spec in &a.scores {
        let (id, path) = split_spec(spec);
        let r = read_bytes(&path)
            .and_then(|b| read_scores(b.as_slice(), &id, &map))
            .map(|m| format!("{} prompt(s), {} rater(s) for {id}", m.prompt_ids().count(), m.raters().count()));
        report("scores", &path, r);
    }
    match first_failure {
        None => ExitCode::SUCCESS,
        Some(c) => ExitCode::from(c.exit_code() as u8),
    }
}

fn resolve_scheme(name: &str, settings: &RunSettings) -> Result<AggregationScheme, AuditError> {
    settings
        .schemes
        .iter()
        .find(|s| s.id == name)
        .cloned()
        .or_else(|| AggregationScheme::preset(name))
        .ok_or_else(|| AuditError::Unknown {
            kind: "scheme".into(),
            name: name.into(),
        })
}

fn run(a: &RunArgs, fixed_sections: Option<Vec<SectionKind>>) -> Result<ExitCode, AuditError> {
    let format: Format = a.format.parse()?;
    let sections = match (&a.sections, fixed_sections) {
        (Some(s), _) => SectionKind::parse_list(s)?,
        (None, Some(s)) => s,
        (None, None) => SectionKind::ALL.to_vec(),
    };
    let generated_at = match &a.fixed_time {
        Some(t) => DateTime::parse_from_rfc3339(t)
            .map_err(|e| usage(format!("--fixed-time: {e}")))?
            .with_timezone(&Utc)
            .to_rfc3339_opts(SecondsFormat::Secs, true),
        None => Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
    };

    let mut fingerprint_inputs: Vec<Vec<u8>> = Vec::new();
    let settings = match &a.config {
        Some(p) => {
            let bytes = read_bytes(p)?;
            let text = String::from_utf8(bytes.clone()).map_err(|_| usage("config file is not UTF-8"))?;
            fingerprint_inputs.push(bytes);
            parse_config(&text)?
        }
        None => RunSettings::default(),
    };
    let mut map = HeaderMap::new();
    for (from, to) in &settings.column_map {
        map = map.rename(from, to);
    }

    let mut warnings = Vec::new();
    let mut inputs = AuditInputs {
        configs: settings.configs.clone(),
        ..Default::default()
    };

    let trial_specs: BTreeMap<String, PathBuf> = a.trials.iter().map(|s| split_spec(s)).collect();
    let score_specs: BTreeMap<String, PathBuf> = a.scores.iter().map(|s| split_spec(s)).collect();
    let tracker_specs: BTreeMap<String, PathBuf> = a.tracker.iter().map(|s| split_spec(s)).collect();
    if trial_specs.len() != a.trials.len() || score_specs.len() != a.scores.len() {
        return Err(usage("each configuration id may be given at most once per input kind"));
    }

    for (id, path) in &trial_specs {
        let bytes = read_bytes(path)?;
        let trials = if tracker_specs.contains_key(id) {
            read_trial_timings(bytes.as_slice(), id, &map)
        } else {
            read_trials(bytes.as_slice(), id, &map)
        };
        let trials = trials
            .map_err(|e| e.in_stage("ingest", Some("run `lpw-audit validate` on the file")))?;
        fingerprint_inputs.push(bytes);
        inputs.trials.insert(id.clone(), trials);
    }
    for (id, path) in &tracker_specs {
        let bytes = read_bytes(path)?;
        let readings = read_tracker_log(bytes.as_slice()).map_err(|e| e.in_stage("ingest", None))?;
        fingerprint_inputs.push(bytes);
        let trials = inputs.trials.get_mut(id).ok_or_else(|| usage(format!("--tracker {id}: no trials for that id")))?;
        let pairs = snapshot_pairs(&readings, 0.0).map_err(|e| e.in_stage("ingest", None))?;
        attach_snapshots(trials, &pairs).map_err(|e| e.in_stage("ingest", None))?;
    }
    for (id, path) in &score_specs {
        let bytes = read_bytes(path)?;
        let m = read_scores(bytes.as_slice(), id, &map)
            .map_err(|e| e.in_stage("ingest", Some("run `lpw-audit validate` on the file")))?;
        fingerprint_inputs.push(bytes);
        inputs.scores.insert(id.clone(), m);
    }
    for id in trial_specs.keys().chain(score_specs.keys()) {
        if !inputs.configs.iter().any(|c| &c.config_id == id) {
            warnings.push(format!("{id}: no configuration entry; idle power taken as 0 W"));
            inputs.configs.push(ConfigDescriptor {
                config_id: id.clone(),
                precision: Precision::parse(id),
                cache_regime: CacheRegime::NotApplicable,
                hardware: String::new(),
                idle_power_w: 0.0,
            });
        }
    }
    inputs.fingerprint = fingerprint(fingerprint_inputs.iter().map(Vec::as_slice));

    let mut opts = AuditOptions {
        sections,
        generated_at,
        ..Default::default()
    };
    if !a.scheme.is_empty() {
        let schemes = a
            .scheme
            .iter()
            .map(|n| resolve_scheme(n, &settings))
            .collect::<Result<Vec<_>, _>>()?;
        opts.scheme = schemes[0].clone();
        opts.weighting_schemes = schemes;
    } else {
        opts.weighting_schemes.extend(settings.schemes.iter().cloned());
    }
    opts.thresholds_s = match &a.thresholds {
        Some(t) => number_list("thresholds", t)?,
        None => settings.thresholds_s.clone().unwrap_or(opts.thresholds_s),
    };
    opts.battery_wh = a.battery_wh.or(settings.battery_wh).unwrap_or(opts.battery_wh);
    opts.clamp_floor_j = a.clamp_floor_j.or(settings.clamp_floor_j).unwrap_or(opts.clamp_floor_j);
    let mut scenarios = cloud_presets();
    scenarios.extend(settings.scenarios.iter().cloned());
    if !a.scenario.is_empty() {
        let mut picked = Vec::new();
        for name in &a.scenario {
            let s = scenarios.iter().find(|s| &s.name == name).ok_or_else(|| AuditError::Unknown {
                kind: "scenario".into(),
                name: name.clone(),
            })?;
            picked.push(s.clone());
        }
        scenarios = picked;
    }
    opts.scenarios = scenarios;
    if let Some(l) = &a.laptop_latencies {
        let v = number_list("laptop-latencies", l)?;
        let [full, quant] = v[..] else {
            return Err(usage("--laptop-latencies expects FULL,QUANT"));
        };
        opts.laptop = Some(LaptopComparison {
            l_full_s: full,
            l_quant_s: quant,
            quality_ratio: a.quality_ratio,
            assumed_power_w: a.assumed_power_w,
        });
    }
    if let Some(c) = &a.compare {
        let (x, y) = c.split_once(',').ok_or_else(|| usage("--compare expects A,B"))?;
        opts.compare = Some((x.trim().to_string(), y.trim().to_string()));
    }

    let mut report = run_audit(&inputs, &opts)?;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    let doc = render(&report, format);
    match &a.output {
        Some(p) => std::fs::write(p, doc).map_err(|source| AuditError::Io {
            path: p.clone(),
            source,
        })?,
        None => print!("{doc}"),
    }
    if report.insufficient_data {
        eprintln!("lpw-audit: error [{}]: report incomplete, see warnings", ErrorClass::InsufficientData.as_str());
        return Ok(ExitCode::from(ErrorClass::InsufficientData.exit_code() as u8));
    }
    Ok(ExitCode::SUCCESS)
}
