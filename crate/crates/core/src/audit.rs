//! End-to-end audit: energy accounting, scoring, metrics, reliability,
//! paired statistics, barrier analysis and scenarios, assembled into an
//! [`AuditReport`].

use std::collections::BTreeMap;

use crate::dataset::{CacheRegime, ConfigDescriptor, Dimension, ScoreMatrix, TrialRecord};
use crate::energy::{account_dataset, IdleCalibration, DEFAULT_CLAMP_FLOOR_J};
use crate::error::{AuditError, Result};
use crate::inferstat::{compare_slices, ComparisonTable, Grouping, PairedUnit, UnitValues, ValueSelector};
use crate::metrics::{
    aggregate, barrier_analysis, metric_rows, per_category, regime_comparison, summarize_rows, MetricKind,
    MetricRow, RegimeMeans, DEFAULT_THRESHOLDS_S,
};
use crate::reliability::{
    human_ai_correlation, reliability_report, severity_decomposition, Coefficient, CorrelationTarget, RaterGroup,
};
use crate::report::{AuditReport, Cell, Section, SectionKind, Table};
use crate::scenarios::{batch_adjust, cloud_presets, evaluate_cloud, power_invariant_ratio, CloudScenario, BATCH_ONE_FACTOR};
use crate::scoring::{quality_profiles, AggregationScheme, QualityProfile};

/// Battery capacity used when none is given, in Watt-hours.
pub const DEFAULT_BATTERY_WH: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AuditInputs {
    /// Presentation order.
    pub configs: Vec<ConfigDescriptor>,
    pub trials: BTreeMap<String, Vec<TrialRecord>>,
    pub scores: BTreeMap<String, ScoreMatrix>,
    pub fingerprint: String,
}

/// Latencies for the power-invariant laptop comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaptopComparison {
    pub l_full_s: f64,
    pub l_quant_s: f64,
    pub quality_ratio: f64,
    pub assumed_power_w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    pub sections: Vec<SectionKind>,
    /// Scheme behind quality, metrics and paired tests.
    pub scheme: AggregationScheme,
    pub weighting_schemes: Vec<AggregationScheme>,
    pub rater_schemes: Vec<AggregationScheme>,
    pub thresholds_s: Vec<f64>,
    pub battery_wh: f64,
    pub clamp_floor_j: f64,
    pub scenarios: Vec<CloudScenario>,
    pub laptop: Option<LaptopComparison>,
    /// `(a, b)`; differences and ratios are taken as `a - b` and `a / b`.
    pub compare: Option<(String, String)>,
    pub generated_at: String,
}

impl Default for AuditOptions {
    fn default() -> Self {
        AuditOptions {
            sections: SectionKind::ALL.to_vec(),
            scheme: AggregationScheme::primary(),
            weighting_schemes: AggregationScheme::weighting_presets(),
            rater_schemes: AggregationScheme::rater_presets(),
            thresholds_s: DEFAULT_THRESHOLDS_S.to_vec(),
            battery_wh: DEFAULT_BATTERY_WH,
            clamp_floor_j: DEFAULT_CLAMP_FLOOR_J,
            scenarios: cloud_presets(),
            laptop: None,
            compare: None,
            generated_at: String::new(),
        }
    }
}

struct ConfigData<'a> {
    desc: &'a ConfigDescriptor,
    clamped: usize,
    trials: Vec<TrialRecord>,
    scored: Option<Scored>,
}

struct Scored {
    profiles: BTreeMap<u32, QualityProfile>,
    rows: Vec<MetricRow>,
}

fn stage<T>(r: Result<T>, name: &'static str, hint: Option<&'static str>) -> Result<T> {
    r.map_err(|e| e.in_stage(name, hint))
}

/// Runs the requested sections. An entirely empty dataset yields a report
/// with warnings and `insufficient_data` set rather than an error.
pub fn run_audit(inputs: &AuditInputs, opts: &AuditOptions) -> Result<AuditReport> {
    let mut sections = opts.sections.clone();
    sections.sort();
    sections.dedup();
    if sections.is_empty() {
        return Err(AuditError::domain("no report sections selected"));
    }

    let mut report = AuditReport {
        generated_at: opts.generated_at.clone(),
        fingerprint: inputs.fingerprint.clone(),
        ..Default::default()
    };

    let trial_count: usize = inputs.trials.values().map(Vec::len).sum();
    let score_count: usize = inputs.scores.values().filter(|m| !m.is_empty()).count();
    let no_trials = trial_count == 0;
    if no_trials && sections.iter().any(|s| s.needs_trials()) {
        report.insufficient_data = true;
        report.warnings.push("dataset is empty: no trials were supplied".into());
    }
    if no_trials && score_count == 0 && sections.iter().any(|s| s.needs_scores()) {
        report.insufficient_data = true;
        report.warnings.push("no scores were supplied".into());
    }

    // energy
    let mut data: Vec<ConfigData> = Vec::new();
    for (config_id, trials) in &inputs.trials {
        if !inputs.configs.iter().any(|c| &c.config_id == config_id) {
            return Err(AuditError::MissingData(format!("trials for unknown configuration {config_id}"))
                .in_stage("ingest", Some("declare the configuration in the config file")));
        }
        if trials.is_empty() {
            report.warnings.push(format!("{config_id}: trial file has no rows"));
        }
    }
    for desc in &inputs.configs {
        let Some(trials) = inputs.trials.get(&desc.config_id) else {
            continue;
        };
        if trials.is_empty() {
            continue;
        }
        let cal = stage(IdleCalibration::from_power(desc.idle_power_w), "energy", None)?;
        let acct = stage(account_dataset(trials, &cal, opts.clamp_floor_j), "energy", None)?;
        report.clamp_counts.insert(desc.config_id.clone(), acct.clamp_count());
        if acct.clamp_count() > 0 {
            report.warnings.push(format!(
                "{}: net energy clamped to {} J for {} trial(s): prompts {}",
                desc.config_id,
                opts.clamp_floor_j,
                acct.clamp_count(),
                join_ids(&acct.clamped)
            ));
        }
        data.push(ConfigData {
            desc,
            clamped: acct.clamp_count(),
            trials: acct.trials,
            scored: None,
        });
    }
    for config_id in inputs.scores.keys() {
        if !inputs.trials.contains_key(config_id) {
            report.warnings.push(format!("{config_id}: scores supplied without trials"));
        }
    }

    // scoring and metrics
    let quality_needed = sections.iter().any(|s| s.needs_trials() && s.needs_scores());
    for d in &mut data {
        let id = &d.desc.config_id;
        let Some(scores) = inputs.scores.get(id) else {
            if quality_needed {
                return Err(AuditError::MissingData(format!("no scores for configuration {id}"))
                    .in_stage("scoring", Some("supply a score file for every configuration, or select only energy-side sections")));
            }
            continue;
        };
        let profiles = stage(quality_profiles(scores, &opts.scheme), "scoring", None)?;
        let q: BTreeMap<u32, f64> = profiles.iter().map(|p| (p.prompt_id, p.q_ped)).collect();
        let rows = stage(metric_rows(&d.trials, &q), "metrics", None)?;
        if !rows.unscored.is_empty() {
            report.warnings.push(format!(
                "{id}: {} trial(s) without scores left out of quality metrics: prompts {}",
                rows.unscored.len(),
                join_ids(&rows.unscored)
            ));
        }
        let trial_ids: std::collections::BTreeSet<u32> = d.trials.iter().map(|t| t.prompt_id).collect();
        let orphan: Vec<u32> = q.keys().copied().filter(|p| !trial_ids.contains(p)).collect();
        if !orphan.is_empty() {
            report.warnings.push(format!(
                "{id}: {} scored prompt(s) without a trial: {}",
                orphan.len(),
                join_ids(&orphan)
            ));
        }
        if rows.rows.is_empty() && quality_needed {
            return Err(AuditError::InsufficientData(format!("no scored trials for configuration {id}"))
                .in_stage("metrics", Some("check that trial and score prompt ids overlap")));
        }
        d.scored = Some(Scored {
            profiles: profiles.into_iter().map(|p| (p.prompt_id, p)).collect(),
            rows: rows.rows,
        });
    }

    let pair = resolve_pair(&data, opts, &mut report.warnings)?;

    for kind in sections {
        if no_trials && kind.needs_trials() {
            report.sections.push(Section { kind, tables: Vec::new() });
            continue;
        }
        let section = match kind {
            SectionKind::Energy => energy_section(&data),
            SectionKind::Quality => quality_section(inputs, opts, &mut report.warnings)?,
            SectionKind::Aggregate => aggregate_section(&data, pair)?,
            SectionKind::PerCategory => category_section(&data)?,
            SectionKind::WeightingSweep => sweep_section(kind, &data, inputs, &opts.weighting_schemes, pair)?,
            SectionKind::RaterSweep => sweep_section(kind, &data, inputs, &opts.rater_schemes, pair)?,
            SectionKind::Reliability => reliability_section(inputs, &mut report.warnings)?,
            SectionKind::Inferential => inferential_section(&data, pair, &mut report.warnings)?,
            SectionKind::Barrier => barrier_section(&data, opts)?,
            SectionKind::Regime => regime_section(&data, &mut report.warnings)?,
            SectionKind::Scenarios => {
                let refs: Vec<(String, f64)> = data
                    .iter()
                    .filter_map(|d| {
                        let s = d.scored.as_ref()?;
                        let m = summarize_rows(&s.rows, &d.desc.config_id, MetricKind::Lpw).ok()?;
                        Some((d.desc.config_id.clone(), m.mean))
                    })
                    .collect();
                scenario_section(&refs, opts, &mut report.warnings)?
            }
        };
        report.sections.push(section);
    }
    Ok(report)
}

fn join_ids(ids: &[u32]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids.iter().take(SHOWN).map(u32::to_string).collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}

/// Indices of the two configurations compared pairwise, if any.
fn resolve_pair(data: &[ConfigData], opts: &AuditOptions, warnings: &mut Vec<String>) -> Result<Option<(usize, usize)>> {
    let find = |id: &str| data.iter().position(|d| d.desc.config_id == id);
    if let Some((a, b)) = &opts.compare {
        let ia = find(a).ok_or_else(|| AuditError::Unknown {
            kind: "configuration".into(),
            name: a.clone(),
        })?;
        let ib = find(b).ok_or_else(|| AuditError::Unknown {
            kind: "configuration".into(),
            name: b.clone(),
        })?;
        if ia == ib {
            warnings.push(format!("{a} is compared with itself"));
        }
        return Ok(Some((ia, ib)));
    }
    // default: the two cache-on (or regime-less) configurations, in order
    let primary: Vec<usize> = (0..data.len())
        .filter(|&i| data[i].desc.cache_regime != CacheRegime::CacheOff)
        .collect();
    if primary.len() == 2 {
        return Ok(Some((primary[0], primary[1])));
    }
    if data.len() == 2 {
        return Ok(Some((0, 1)));
    }
    if data.len() > 1 {
        warnings.push("more than two configurations and no comparison pair given; pairwise sections skipped".into());
    }
    Ok(None)
}

fn scored<'a>(d: &'a ConfigData) -> Option<&'a Scored> {
    d.scored.as_ref()
}

fn aggregate_section(data: &[ConfigData], pair: Option<(usize, usize)>) -> Result<Section> {
    let mut means = Table::new(
        "Aggregate results",
        &["config", "precision", "n", "mean latency (s)", "mean net energy (J)", "mean Q_ped", "mean LpW"],
    );
    let mut dist = Table::new(
        "LpW distribution",
        &["config", "mean", "median", "p5", "p25", "p75", "p95", "min", "max"],
    );
    let mut aggs = Vec::new();
    for d in data {
        let Some(s) = scored(d) else { continue };
        let a = aggregate(&s.rows, &d.desc.config_id, &d.desc.precision.to_string())?;
        means.push(vec![
            Cell::text(&a.config_id),
            Cell::text(&a.precision),
            Cell::Int(a.n as u64),
            Cell::Seconds(a.latency_s),
            Cell::Joules(a.net_j),
            Cell::Score(a.q_ped),
            Cell::Lpw(a.lpw),
        ]);
        let m = summarize_rows(&s.rows, &d.desc.config_id, MetricKind::Lpw)?;
        dist.push(vec![
            Cell::text(&m.config_id),
            Cell::Lpw(m.mean),
            Cell::Lpw(m.median),
            Cell::Lpw(m.p5),
            Cell::Lpw(m.p25),
            Cell::Lpw(m.p75),
            Cell::Lpw(m.p95),
            Cell::Lpw(m.min),
            Cell::Lpw(m.max),
        ]);
        aggs.push(a);
    }
    means.note("means are arithmetic means of per-trial values; LpW is not the ratio of means");
    dist.note("percentiles interpolate linearly between order statistics");
    let mut tables = vec![means];
    if let Some((ia, ib)) = pair {
        let find = |i: usize| aggs.iter().find(|a| a.config_id == data[i].desc.config_id);
        if let (Some(a), Some(b)) = (find(ia), find(ib)) {
            let mut t = Table::new(
                format!("Ratios {} vs {}", a.config_id, b.config_id),
                &["quantity", "value"],
            );
            t.push(vec![
                Cell::text(format!("latency {}/{}", b.config_id, a.config_id)),
                Cell::Ratio(b.latency_s / a.latency_s),
            ]);
            t.push(vec![
                Cell::text(format!("net energy {}/{}", a.config_id, b.config_id)),
                Cell::Ratio(a.net_j / b.net_j),
            ]);
            t.push(vec![
                Cell::text(format!("Q_ped {} - {}", a.config_id, b.config_id)),
                Cell::Score(a.q_ped - b.q_ped),
            ]);
            t.push(vec![
                Cell::text(format!("LpW {}/{}", a.config_id, b.config_id)),
                Cell::Ratio(a.lpw / b.lpw),
            ]);
            tables.push(t);
        }
    }
    tables.push(dist);
    Ok(Section {
        kind: SectionKind::Aggregate,
        tables,
    })
}

fn category_section(data: &[ConfigData]) -> Result<Section> {
    let kinds = [MetricKind::Latency, MetricKind::NetEnergy, MetricKind::QPed, MetricKind::Lpw];
    let mut tables = Vec::new();
    for d in data {
        let Some(s) = scored(d) else { continue };
        let mut t = Table::new(
            format!("Per-category means: {}", d.desc.config_id),
            &["category", "n", "mean latency (s)", "mean net energy (J)", "mean Q_ped", "mean LpW"],
        );
        for c in per_category(&s.rows, &d.desc.config_id, &kinds)? {
            let mean = |k| c.get(k).map(|s| s.mean).unwrap_or(f64::NAN);
            t.push(vec![
                Cell::text(c.category.as_str()),
                Cell::Int(c.summaries[0].n as u64),
                Cell::Seconds(mean(MetricKind::Latency)),
                Cell::Joules(mean(MetricKind::NetEnergy)),
                Cell::Score(mean(MetricKind::QPed)),
                Cell::Lpw(mean(MetricKind::Lpw)),
            ]);
        }
        tables.push(t);
    }
    Ok(Section {
        kind: SectionKind::PerCategory,
        tables,
    })
}

fn sweep_section(
    kind: SectionKind,
    data: &[ConfigData],
    inputs: &AuditInputs,
    schemes: &[AggregationScheme],
    pair: Option<(usize, usize)>,
) -> Result<Section> {
    let title = match kind {
        SectionKind::WeightingSweep => "Dimension-weighting sensitivity",
        _ => "Rater-aggregation sensitivity",
    };
    let mut t = Table::new(title, &["scheme", "weights CA/CC/SQ/LA", "human weight", "config", "mean Q_ped", "mean LpW"]);
    let mut ratios = pair.map(|(a, b)| {
        Table::new(
            format!("LpW ratio {}/{} by scheme", data[a].desc.config_id, data[b].desc.config_id),
            &["scheme", "ratio"],
        )
    });
    for scheme in schemes {
        let mut lpw_by_config: BTreeMap<&str, f64> = BTreeMap::new();
        for d in data {
            let Some(scores) = inputs.scores.get(&d.desc.config_id) else { continue };
            let profiles = stage(quality_profiles(scores, scheme), "scoring", None)?;
            let q: BTreeMap<u32, f64> = profiles.iter().map(|p| (p.prompt_id, p.q_ped)).collect();
            let rows = stage(metric_rows(&d.trials, &q), "metrics", None)?.rows;
            if rows.is_empty() {
                continue;
            }
            let q_mean = summarize_rows(&rows, &d.desc.config_id, MetricKind::QPed)?.mean;
            let lpw_mean = summarize_rows(&rows, &d.desc.config_id, MetricKind::Lpw)?.mean;
            lpw_by_config.insert(&d.desc.config_id, lpw_mean);
            let w = scheme.dimension_weights;
            t.push(vec![
                Cell::text(&scheme.id),
                Cell::text(format!("{:.2}/{:.2}/{:.2}/{:.2}", w[0], w[1], w[2], w[3])),
                Cell::Score(scheme.human_weight),
                Cell::text(&d.desc.config_id),
                Cell::Score(q_mean),
                Cell::Lpw(lpw_mean),
            ]);
        }
        if let (Some(rt), Some((a, b))) = (ratios.as_mut(), pair) {
            let la = lpw_by_config.get(data[a].desc.config_id.as_str());
            let lb = lpw_by_config.get(data[b].desc.config_id.as_str());
            if let (Some(la), Some(lb)) = (la, lb) {
                rt.push(vec![Cell::text(&scheme.id), Cell::Ratio(la / lb)]);
            }
        }
    }
    let mut tables = vec![t];
    tables.extend(ratios);
    Ok(Section { kind, tables })
}

/// Score matrices in configuration order, then any undeclared ones by id.
fn score_matrices(inputs: &AuditInputs) -> Vec<&ScoreMatrix> {
    let mut out: Vec<&ScoreMatrix> = inputs
        .configs
        .iter()
        .filter_map(|c| inputs.scores.get(&c.config_id))
        .collect();
    for (id, m) in &inputs.scores {
        if !inputs.configs.iter().any(|c| &c.config_id == id) {
            out.push(m);
        }
    }
    out
}

fn energy_section(data: &[ConfigData]) -> Section {
    let mut summary = Table::new(
        "Energy accounting",
        &["config", "n", "idle power (W)", "mean gross (J)", "mean net (J)", "clamped"],
    );
    let mut tables = Vec::new();
    for d in data {
        let mut t = Table::new(
            format!("Per-trial energy: {}", d.desc.config_id),
            &["prompt_id", "category", "latency (s)", "gross (J)", "idle share (J)", "net (J)"],
        );
        let mut gross_sum = 0.0;
        let mut gross_n = 0usize;
        let mut net_sum = 0.0;
        for tr in &d.trials {
            let idle = d.desc.idle_power_w * tr.latency_s;
            if let Some(g) = tr.gross_j {
                gross_sum += g;
                gross_n += 1;
            }
            net_sum += tr.net_j.unwrap_or(0.0);
            t.push(vec![
                Cell::Int(u64::from(tr.prompt_id)),
                Cell::text(tr.category.as_str()),
                Cell::Seconds(tr.latency_s),
                tr.gross_j.map(Cell::Joules).unwrap_or(Cell::Empty),
                if tr.gross_j.is_some() { Cell::Joules(idle) } else { Cell::Empty },
                tr.net_j.map(Cell::Joules).unwrap_or(Cell::Empty),
            ]);
        }
        let n = d.trials.len();
        summary.push(vec![
            Cell::text(&d.desc.config_id),
            Cell::Int(n as u64),
            Cell::Stat(d.desc.idle_power_w),
            if gross_n > 0 { Cell::Joules(gross_sum / gross_n as f64) } else { Cell::Empty },
            Cell::Joules(net_sum / n as f64),
            Cell::Int(d.clamped as u64),
        ]);
        tables.push(t);
    }
    summary.note("net = gross - idle power x latency, floored at the clamp value; provided net energies are used as given");
    tables.insert(0, summary);
    Section {
        kind: SectionKind::Energy,
        tables,
    }
}

fn quality_section(inputs: &AuditInputs, opts: &AuditOptions, warnings: &mut Vec<String>) -> Result<Section> {
    let mut tables = Vec::new();
    for scores in score_matrices(inputs) {
        let id = scores.config_id();
        let mut t = Table::new(
            format!("Per-prompt quality ({}): {id}", opts.scheme.id),
            &["prompt_id", "H CA", "H CC", "H SQ", "H LA", "A CA", "A CC", "A SQ", "A LA", "W CA", "W CC", "W SQ", "W LA", "Q_ped"],
        );
        let profiles = stage(quality_profiles(scores, &opts.scheme), "scoring", None)?;
        if profiles.is_empty() {
            warnings.push(format!("{id}: score file has no rows"));
        }
        for p in profiles {
            let mut row = vec![Cell::Int(u64::from(p.prompt_id))];
            row.extend(p.h_bar.0.iter().map(|v| v.map(Cell::Score).unwrap_or(Cell::Empty)));
            row.extend(p.a_bar.0.iter().map(|v| v.map(Cell::Score).unwrap_or(Cell::Empty)));
            row.extend(p.w.iter().map(|v| Cell::Score(*v)));
            row.push(Cell::Score(p.q_ped));
            t.push(row);
        }
        tables.push(t);
    }
    Ok(Section {
        kind: SectionKind::Quality,
        tables,
    })
}

fn reliability_section(inputs: &AuditInputs, warnings: &mut Vec<String>) -> Result<Section> {
    let mut tables = Vec::new();
    for scores in score_matrices(inputs) {
        let id = &scores.config_id().to_string();
        let mut t = Table::new(
            format!("Inter-rater reliability: {id}"),
            &["group", "dimension", "raters", "alpha (ordinal)", "ICC(2,1)"],
        );
        for group in [RaterGroup::Human, RaterGroup::Ai, RaterGroup::Combined] {
            let r = stage(reliability_report(scores, group), "reliability", None)?;
            warnings.extend(r.warnings.iter().cloned());
            for (dim, cell) in r.per_dimension.iter().map(|(d, c)| (d.as_str(), c)).chain([("overall", &r.overall)]) {
                t.push(vec![
                    Cell::text(group.as_str()),
                    Cell::text(dim),
                    Cell::Int(r.n_raters as u64),
                    Cell::Coef(cell.alpha),
                    Cell::Coef(cell.icc21),
                ]);
            }
        }
        t.note("computed within this configuration only; overall pools (prompt, dimension) units across the four dimensions");
        tables.push(t);

        let mut c = Table::new(format!("Human-AI correlation: {id}"), &["target", "pearson r"]);
        let targets = Dimension::ALL
            .iter()
            .map(|d| (d.as_str(), CorrelationTarget::Dimension(*d)))
            .chain([("overall", CorrelationTarget::Overall)]);
        for (name, target) in targets {
            let r = match human_ai_correlation(scores, target) {
                Ok(r) => r,
                Err(AuditError::InsufficientData(m)) => {
                    warnings.push(format!("{id}: correlation {name} not computed ({m})"));
                    Coefficient::Undefined
                }
                Err(e) => return Err(e.in_stage("reliability", None)),
            };
            c.push(vec![Cell::text(name), Cell::Coef(r)]);
        }
        tables.push(c);

        let mut s = Table::new(
            format!("Rater severity: {id}"),
            &["group", "dimension", "between-rater var", "mean within-rater var", "between/within"],
        );
        for group in [RaterGroup::Human, RaterGroup::Ai] {
            for dim in Dimension::ALL {
                match severity_decomposition(scores, group, dim) {
                    Ok(sd) => s.push(vec![
                        Cell::text(group.as_str()),
                        Cell::text(dim.as_str()),
                        Cell::Stat(sd.between_rater_var),
                        Cell::Stat(sd.mean_within_rater_var),
                        sd.ratio.map(Cell::Ratio).unwrap_or(Cell::text("undefined")),
                    ]),
                    Err(AuditError::InsufficientData(m)) => {
                        warnings.push(format!("{id}: severity {} {dim} not computed ({m})", group.as_str()))
                    }
                    Err(e) => return Err(e.in_stage("reliability", None)),
                }
            }
        }
        tables.push(s);
    }
    Ok(Section {
        kind: SectionKind::Reliability,
        tables,
    })
}

fn unit_values(row: &MetricRow, profile: &QualityProfile) -> UnitValues {
    UnitValues {
        q_ped: row.q_ped,
        w: profile.w,
        latency_s: row.latency_s,
        net_j: row.net_j,
        lpw: row.metrics.lpw,
    }
}

fn comparison_table(title: String, t: &ComparisonTable) -> Table {
    let mut out = Table::new(
        title,
        &[
            "comparison",
            "n",
            "mean diff",
            "sd diff",
            "t",
            "df",
            "p",
            "95% CI low",
            "95% CI high",
            "Cohen's d",
            "Wilcoxon W",
            "Wilcoxon p",
        ],
    );
    for r in &t.rows {
        out.push(vec![
            Cell::text(&r.label),
            Cell::Int(r.n_pairs as u64),
            Cell::Stat(r.mean_diff),
            Cell::Stat(r.sd_diff),
            Cell::Stat(r.t_stat),
            Cell::Int(r.df as u64),
            Cell::P(r.p_two_sided),
            Cell::Stat(r.ci95.0),
            Cell::Stat(r.ci95.1),
            Cell::Stat(r.cohens_d),
            Cell::Stat(r.wilcoxon_w),
            Cell::P(r.wilcoxon_p),
        ]);
    }
    out
}

fn inferential_section(data: &[ConfigData], pair: Option<(usize, usize)>, warnings: &mut Vec<String>) -> Result<Section> {
    let mut tables = Vec::new();
    let Some((ia, ib)) = pair else {
        warnings.push("inferential: no configuration pair to compare".into());
        return Ok(Section {
            kind: SectionKind::Inferential,
            tables,
        });
    };
    let (a, b) = (&data[ia], &data[ib]);
    let (Some(sa), Some(sb)) = (scored(a), scored(b)) else {
        return Ok(Section {
            kind: SectionKind::Inferential,
            tables,
        });
    };
    let (ida, idb) = (&a.desc.config_id, &b.desc.config_id);
    let paired = stage(crate::dataset::join_paired(&sa.rows, &sb.rows), "stats", Some("the two configurations share no prompt ids"))?;
    if paired.unpaired_count() > 0 {
        warnings.push(format!(
            "inferential: {} prompt(s) unpaired between {ida} and {idb} were excluded",
            paired.unpaired_count()
        ));
    }
    let units: Vec<PairedUnit> = paired
        .pairs
        .iter()
        .map(|(ra, rb)| PairedUnit {
            prompt_id: ra.prompt_id,
            category: ra.category,
            a: unit_values(ra, &sa.profiles[&ra.prompt_id]),
            b: unit_values(rb, &sb.profiles[&rb.prompt_id]),
        })
        .collect();

    let q = compare_slices(
        &units,
        ValueSelector::QPed,
        &[Grouping::Overall, Grouping::PerDimension, Grouping::PerCategory],
    );
    warnings.extend(q.warnings.iter().map(|w| format!("inferential: {w}")));
    let mut qt = comparison_table(format!("Paired quality differences ({ida} - {idb})"), &q);
    qt.note("two-sided tests; Wilcoxon drops zero differences, gives tied magnitudes midranks, and is exact up to 25 non-zero differences with a tie-corrected normal approximation above");
    tables.push(qt);

    let mut others = ComparisonTable::default();
    for sel in [ValueSelector::Latency, ValueSelector::NetEnergy, ValueSelector::Lpw] {
        let t = compare_slices(&units, sel, &[Grouping::Overall]);
        others.rows.extend(t.rows);
        warnings.extend(t.warnings.iter().map(|w| format!("inferential: {w}")));
    }
    tables.push(comparison_table(format!("Paired efficiency differences ({ida} - {idb})"), &others));
    Ok(Section {
        kind: SectionKind::Inferential,
        tables,
    })
}

impl crate::dataset::PromptKeyed for MetricRow {
    fn prompt_id(&self) -> u32 {
        self.prompt_id
    }
}

fn barrier_section(data: &[ConfigData], opts: &AuditOptions) -> Result<Section> {
    let mut ex = Table::new("Latency threshold exceedance", &["config", "threshold (s)", "exceeding", "n", "fraction"]);
    let mut bat = Table::new(
        "Battery budget",
        &["config", "mean net energy (J)", "battery (Wh)", "interactions per charge"],
    );
    for d in data {
        let r = stage(
            barrier_analysis(&d.trials, &d.desc.config_id, &opts.thresholds_s, opts.battery_wh),
            "barrier",
            None,
        )?;
        for th in &r.thresholds {
            ex.push(vec![
                Cell::text(&r.config_id),
                Cell::Seconds(th.threshold_s),
                Cell::Int(th.count as u64),
                Cell::Int(r.n as u64),
                Cell::Fraction(th.fraction),
            ]);
        }
        bat.push(vec![
            Cell::text(&r.config_id),
            Cell::Joules(r.mean_net_j),
            Cell::Stat(r.battery_wh),
            Cell::Int(r.interactions_per_charge),
        ]);
    }
    ex.note("a trial exceeds a threshold when its latency is strictly greater");
    bat.note("interactions = floor(battery_wh * 3600 / mean net energy)");
    Ok(Section {
        kind: SectionKind::Barrier,
        tables: vec![ex, bat],
    })
}

fn regime_section(data: &[ConfigData], warnings: &mut Vec<String>) -> Result<Section> {
    // precision -> (cache_on index, cache_off index)
    let mut by_precision: Vec<(String, Option<usize>, Option<usize>)> = Vec::new();
    for (i, d) in data.iter().enumerate() {
        let p = d.desc.precision.to_string();
        let slot = match by_precision.iter().position(|(q, _, _)| *q == p) {
            Some(s) => s,
            None => {
                by_precision.push((p, None, None));
                by_precision.len() - 1
            }
        };
        match d.desc.cache_regime {
            CacheRegime::CacheOn => by_precision[slot].1 = Some(i),
            CacheRegime::CacheOff => by_precision[slot].2 = Some(i),
            CacheRegime::NotApplicable => {}
        }
    }
    let complete: Vec<(String, usize, usize)> = by_precision
        .into_iter()
        .filter_map(|(p, on, off)| Some((p, on?, off?)))
        .collect();
    if complete.len() != 2 {
        warnings.push(format!(
            "regime: needs two precisions each measured with cache on and off, found {}",
            complete.len()
        ));
        return Ok(Section {
            kind: SectionKind::Regime,
            tables: Vec::new(),
        });
    }
    let mut t = Table::new("Cache-regime comparison", &["ratio", "numerator", "denominator", "value"]);
    for kind in [MetricKind::Lpw, MetricKind::Latency, MetricKind::NetEnergy] {
        let means = |p: &(String, usize, usize)| -> Result<Option<RegimeMeans>> {
            let mean = |i: usize| -> Result<Option<f64>> {
                let d = &data[i];
                let rows = match (kind, scored(d)) {
                    (_, Some(s)) => s.rows.iter().map(|r| r.value(kind)).collect::<Vec<_>>(),
                    (MetricKind::Latency, None) => d.trials.iter().map(|t| t.latency_s).collect(),
                    (MetricKind::NetEnergy, None) => d.trials.iter().filter_map(|t| t.net_j).collect(),
                    _ => return Ok(None),
                };
                Ok(Some(crate::metrics::summarize(&rows, &d.desc.config_id, kind.as_str())?.mean))
            };
            Ok(match (mean(p.1)?, mean(p.2)?) {
                (Some(on), Some(off)) => Some(RegimeMeans {
                    config_id: p.0.clone(),
                    cache_on: on,
                    cache_off: off,
                }),
                _ => None,
            })
        };
        let (Some(a), Some(b)) = (means(&complete[0])?, means(&complete[1])?) else {
            warnings.push(format!("regime: {kind} unavailable without scores"));
            continue;
        };
        for r in regime_comparison(kind.as_str(), &a, &b)? {
            let cell = |v: f64| if kind == MetricKind::Lpw { Cell::Lpw(v) } else { Cell::Stat(v) };
            t.push(vec![
                Cell::text(&r.label),
                cell(r.numerator),
                cell(r.denominator),
                Cell::Ratio(r.ratio),
            ]);
        }
    }
    Ok(Section {
        kind: SectionKind::Regime,
        tables: vec![t],
    })
}

fn scenario_section(refs: &[(String, f64)], opts: &AuditOptions, warnings: &mut Vec<String>) -> Result<Section> {
    let mut columns = vec!["scenario", "energy (J)", "latency (s)", "Q_ped", "cloud LpW"];
    let labels: Vec<String> = refs.iter().map(|(n, _)| format!("vs {n}")).collect();
    columns.extend(labels.iter().map(String::as_str));
    columns.push("source");
    let mut t = Table::new("Cloud LpW scenarios", &columns);
    for s in &opts.scenarios {
        let mut row = vec![
            Cell::text(&s.name),
            Cell::Joules(s.server_energy_j),
            Cell::Seconds(s.latency_s),
            Cell::Score(s.q_ped_assumed),
        ];
        if refs.is_empty() {
            row.push(Cell::Lpw(s.lpw()));
        } else {
            let ev = stage(evaluate_cloud(s, refs), "scenarios", None)?;
            row.push(Cell::Lpw(ev.lpw));
            row.extend(ev.comparisons.iter().map(|c| Cell::text(&c.phrase)));
        }
        row.push(Cell::text(&s.source));
        t.push(row);
    }
    if refs.is_empty() {
        t.note("no measured configurations; comparisons omitted");
    }
    t.note(format!(
        "batch-size-1 energy = batch-8 energy x {BATCH_ONE_FACTOR} (e.g. 1550 J -> {} J)",
        batch_adjust(1550.0, BATCH_ONE_FACTOR)?
    ));
    let mut tables = vec![t];

    if let Some(l) = opts.laptop {
        let c = stage(
            power_invariant_ratio(l.l_full_s, l.l_quant_s, l.quality_ratio, l.assumed_power_w),
            "scenarios",
            None,
        )?;
        let mut p = Table::new(
            "Power-invariant laptop comparison",
            &["full latency (s)", "quantised latency (s)", "quality ratio", "LpW ratio quant/full"],
        );
        p.push(vec![
            Cell::Seconds(c.l_full_s),
            Cell::Seconds(c.l_quant_s),
            Cell::Ratio(c.quality_ratio),
            Cell::Ratio(c.lpw_ratio),
        ]);
        p.note("the LpW ratio equals quality_ratio * (full/quant latency)^2 for any constant power");
        tables.push(p);
        if let Some(ill) = c.illustration {
            let mut i = Table::new(
                format!("Illustrative figures at {} W", ill.assumed_power_w),
                &["variant", "energy (J)", "LpW"],
            );
            i.push(vec![Cell::text("full"), Cell::Joules(ill.e_full_j), Cell::Lpw(ill.lpw_full)]);
            i.push(vec![Cell::text("quantised"), Cell::Joules(ill.e_quant_j), Cell::Lpw(ill.lpw_quant)]);
            i.note(format!("LpW uses reference Q_ped {}", ill.q_reference));
            tables.push(i);
        }
    }
    if opts.scenarios.is_empty() && opts.laptop.is_none() {
        warnings.push("scenarios: nothing to evaluate".into());
    }
    Ok(Section {
        kind: SectionKind::Scenarios,
        tables,
    })
}
