//! Per-trial composite metrics (LpW and alternates), distributional
//! summaries, Power-Barrier analysis and cache-regime ratios.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dataset::{Category, TrialRecord};
use crate::error::{AuditError, Result};

/// Default latency thresholds, in seconds.
pub const DEFAULT_THRESHOLDS_S: [f64; 3] = [10.0, 15.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialMetrics {
    /// `q / (E * L)`, per Joule-second.
    pub lpw: f64,
    pub qpj: f64,
    pub qps: f64,
    /// `q / sqrt(E * L)`.
    pub lpw_geo: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(AuditError::domain(format!("{name} must be > 0, got {v}")))
    }
}

pub fn trial_metrics(q_ped: f64, net_j: f64, latency_s: f64) -> Result<TrialMetrics> {
    check_positive("q_ped", q_ped)?;
    check_positive("net energy", net_j)?;
    check_positive("latency", latency_s)?;
    Ok(TrialMetrics {
        lpw: q_ped / (net_j * latency_s),
        qpj: q_ped / net_j,
        qps: q_ped / latency_s,
        lpw_geo: q_ped / (net_j * latency_s).sqrt(),
    })
}

/// LpW with a fixed reference quality, isolating system efficiency from
/// response quality. `q_ref = 0` yields 0.
pub fn fixed_q_lpw(net_j: f64, latency_s: f64, q_ref: f64) -> Result<f64> {
    check_positive("net energy", net_j)?;
    check_positive("latency", latency_s)?;
    if !(q_ref >= 0.0) || !q_ref.is_finite() {
        return Err(AuditError::domain(format!("reference quality must be >= 0, got {q_ref}")));
    }
    Ok(q_ref / (net_j * latency_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Latency,
    NetEnergy,
    QPed,
    Lpw,
    Qpj,
    Qps,
    LpwGeo,
}

impl MetricKind {
    pub const ALL: [MetricKind; 7] = [
        MetricKind::Latency,
        MetricKind::NetEnergy,
        MetricKind::QPed,
        MetricKind::Lpw,
        MetricKind::Qpj,
        MetricKind::Qps,
        MetricKind::LpwGeo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Latency => "latency_s",
            MetricKind::NetEnergy => "net_j",
            MetricKind::QPed => "q_ped",
            MetricKind::Lpw => "lpw",
            MetricKind::Qpj => "qpj",
            MetricKind::Qps => "qps",
            MetricKind::LpwGeo => "lpw_geo",
        }
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scored, energy-accounted trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricRow {
    pub prompt_id: u32,
    pub category: Category,
    pub q_ped: f64,
    pub net_j: f64,
    pub latency_s: f64,
    pub metrics: TrialMetrics,
}

impl MetricRow {
    pub fn value(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Latency => self.latency_s,
            MetricKind::NetEnergy => self.net_j,
            MetricKind::QPed => self.q_ped,
            MetricKind::Lpw => self.metrics.lpw,
            MetricKind::Qpj => self.metrics.qpj,
            MetricKind::Qps => self.metrics.qps,
            MetricKind::LpwGeo => self.metrics.lpw_geo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MetricRows {
    /// Ascending by prompt id.
    pub rows: Vec<MetricRow>,
    /// Trials with no quality score.
    pub unscored: Vec<u32>,
}

/// Joins energy-accounted trials of one configuration with per-prompt
/// quality. Trials without a score are listed in `unscored`.
pub fn metric_rows(trials: &[TrialRecord], q_ped: &BTreeMap<u32, f64>) -> Result<MetricRows> {
    let mut out = MetricRows::default();
    for t in trials {
        let net = t.net_j.ok_or(AuditError::IncompleteEnergy { prompt_id: t.prompt_id })?;
        match q_ped.get(&t.prompt_id) {
            Some(&q) => out.rows.push(MetricRow {
                prompt_id: t.prompt_id,
                category: t.category,
                q_ped: q,
                net_j: net,
                latency_s: t.latency_s,
                metrics: trial_metrics(q, net, t.latency_s).map_err(|e| {
                    AuditError::domain(format!("prompt {}: {e}", t.prompt_id))
                })?,
            }),
            None => out.unscored.push(t.prompt_id),
        }
    }
    out.rows.sort_by_key(|r| r.prompt_id);
    out.unscored.sort_unstable();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub config_id: String,
    pub metric: String,
    pub mean: f64,
    pub median: f64,
    pub p5: f64,
    pub p25: f64,
    pub p75: f64,
    pub p95: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Percentile of sorted data by linear interpolation between the closest
/// order statistics (`h = (n - 1) p`).
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let (a, b) = (sorted[lo], sorted[lo + 1]);
    (a + (h - lo as f64) * (b - a)).clamp(a, b)
}

/// Summary statistics; the mean is the arithmetic mean of the values in the
/// order given.
pub fn summarize(values: &[f64], config_id: &str, metric: &str) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(AuditError::InsufficientData(format!(
            "no values to summarise for {config_id} {metric}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let mean = (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max);
    Ok(MetricSummary {
        config_id: config_id.to_string(),
        metric: metric.to_string(),
        mean,
        median: percentile_sorted(&sorted, 0.5),
        p5: percentile_sorted(&sorted, 0.05),
        p25: percentile_sorted(&sorted, 0.25),
        p75: percentile_sorted(&sorted, 0.75),
        p95: percentile_sorted(&sorted, 0.95),
        min,
        max,
        n: values.len(),
    })
}

pub fn summarize_rows(rows: &[MetricRow], config_id: &str, kind: MetricKind) -> Result<MetricSummary> {
    let values: Vec<f64> = rows.iter().map(|r| r.value(kind)).collect();
    summarize(&values, config_id, kind.as_str())
}

/// Mean latency, net energy, quality and LpW for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub config_id: String,
    pub precision: String,
    pub n: usize,
    pub latency_s: f64,
    pub net_j: f64,
    pub q_ped: f64,
    pub lpw: f64,
}

pub fn aggregate(rows: &[MetricRow], config_id: &str, precision: &str) -> Result<AggregateRow> {
    let s = |k| summarize_rows(rows, config_id, k).map(|s| s.mean);
    Ok(AggregateRow {
        config_id: config_id.to_string(),
        precision: precision.to_string(),
        n: rows.len(),
        latency_s: s(MetricKind::Latency)?,
        net_j: s(MetricKind::NetEnergy)?,
        q_ped: s(MetricKind::QPed)?,
        lpw: s(MetricKind::Lpw)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub summaries: Vec<MetricSummary>,
}

impl CategorySummary {
    pub fn get(&self, kind: MetricKind) -> Option<&MetricSummary> {
        self.summaries.iter().find(|s| s.metric == kind.as_str())
    }
}

/// Summaries per category in canonical category order; absent categories
/// are omitted.
pub fn per_category(rows: &[MetricRow], config_id: &str, kinds: &[MetricKind]) -> Result<Vec<CategorySummary>> {
    let mut out = Vec::new();
    for c in Category::ALL {
        let sub: Vec<MetricRow> = rows.iter().filter(|r| r.category == c).copied().collect();
        if sub.is_empty() {
            continue;
        }
        let summaries = kinds
            .iter()
            .map(|k| summarize_rows(&sub, config_id, *k))
            .collect::<Result<Vec<_>>>()?;
        out.push(CategorySummary { category: c, summaries });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdExceedance {
    pub threshold_s: f64,
    /// Trials with latency strictly greater than the threshold.
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarrierReport {
    pub config_id: String,
    pub n: usize,
    pub thresholds: Vec<ThresholdExceedance>,
    pub battery_wh: f64,
    pub mean_net_j: f64,
    /// `floor(battery_wh * 3600 / mean_net_j)`.
    pub interactions_per_charge: u64,
}

/// Interactions a battery supports at a given mean energy per interaction.
pub fn interactions_per_charge(battery_wh: f64, mean_net_j: f64) -> Result<u64> {
    check_positive("battery capacity", battery_wh)?;
    check_positive("mean net energy", mean_net_j)?;
    Ok((battery_wh * 3600.0 / mean_net_j).floor() as u64)
}

pub fn barrier_analysis(
    trials: &[TrialRecord],
    config_id: &str,
    thresholds_s: &[f64],
    battery_wh: f64,
) -> Result<BarrierReport> {
    check_positive("battery capacity", battery_wh)?;
    if trials.is_empty() {
        return Err(AuditError::InsufficientData(format!("no trials for barrier analysis of {config_id}")));
    }
    for &t in thresholds_s {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(AuditError::domain(format!("latency threshold must be >= 0 s, got {t}")));
        }
    }
    let mut nets = Vec::with_capacity(trials.len());
    for t in trials {
        nets.push(t.net_j.ok_or(AuditError::IncompleteEnergy { prompt_id: t.prompt_id })?);
    }
    let n = trials.len();
    let mean_net_j = nets.iter().sum::<f64>() / n as f64;
    let thresholds = thresholds_s
        .iter()
        .map(|&th| {
            let count = trials.iter().filter(|t| t.latency_s > th).count();
            ThresholdExceedance {
                threshold_s: th,
                count,
                fraction: count as f64 / n as f64,
            }
        })
        .collect();
    Ok(BarrierReport {
        config_id: config_id.to_string(),
        n,
        thresholds,
        battery_wh,
        mean_net_j,
        interactions_per_charge: interactions_per_charge(battery_wh, mean_net_j)?,
    })
}

/// Means of one metric for a configuration under both cache regimes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeMeans {
    pub config_id: String,
    pub cache_on: f64,
    pub cache_off: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedRatio {
    pub label: String,
    pub numerator: f64,
    pub denominator: f64,
    pub ratio: f64,
}

fn named_ratio(label: String, numerator: f64, denominator: f64) -> Result<NamedRatio> {
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(AuditError::domain(format!("{label}: zero denominator")));
    }
    Ok(NamedRatio {
        label,
        numerator,
        denominator,
        ratio: numerator / denominator,
    })
}

/// Cross-configuration ratios within each regime, then ON/OFF ratios within
/// each configuration. Every ratio is labelled with its orientation.
pub fn regime_comparison(metric: &str, a: &RegimeMeans, b: &RegimeMeans) -> Result<Vec<NamedRatio>> {
    Ok(vec![
        named_ratio(format!("{metric} {}/{} cache_on", a.config_id, b.config_id), a.cache_on, b.cache_on)?,
        named_ratio(format!("{metric} {}/{} cache_off", a.config_id, b.config_id), a.cache_off, b.cache_off)?,
        named_ratio(format!("{metric} {} ON/OFF", a.config_id), a.cache_on, a.cache_off)?,
        named_ratio(format!("{metric} {} ON/OFF", b.config_id), b.cache_on, b.cache_off)?,
    ])
}

pub fn regime_comparison_from_summaries(
    on_a: &MetricSummary,
    off_a: &MetricSummary,
    on_b: &MetricSummary,
    off_b: &MetricSummary,
) -> Result<Vec<NamedRatio>> {
    let metrics = [&on_a.metric, &off_a.metric, &on_b.metric, &off_b.metric];
    if metrics.iter().any(|m| *m != metrics[0]) {
        return Err(AuditError::domain("regime comparison needs four summaries of the same metric"));
    }
    regime_comparison(
        &on_a.metric,
        &RegimeMeans {
            config_id: on_a.config_id.clone(),
            cache_on: on_a.mean,
            cache_off: off_a.mean,
        },
        &RegimeMeans {
            config_id: on_b.config_id.clone(),
            cache_on: on_b.mean,
            cache_off: off_b.mean,
        },
    )
}

/// Writes `prompt_id,lpw,qpj,qps,lpw_geo`.
pub fn write_trial_metrics<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| AuditError::io("metrics export", std::io::Error::other(e));
    w.write_record(["prompt_id", "lpw", "qpj", "qps", "lpw_geo"]).map_err(err)?;
    for r in rows {
        let m = r.metrics;
        w.write_record([
            r.prompt_id.to_string(),
            m.lpw.to_string(),
            m.qpj.to_string(),
            m.qps.to_string(),
            m.lpw_geo.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| AuditError::io("metrics export", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bin counts over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(AuditError::domain("histogram needs at least one bin"));
    }
    if values.is_empty() {
        return Err(AuditError::InsufficientData("no values to bin".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Ok(vec![HistogramBin {
            lo: min,
            hi: max,
            count: values.len(),
        }]);
    }
    let width = (max - min) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: min + width * i as f64,
            hi: if i + 1 == bins { max } else { min + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for v in values {
        let i = (((v - min) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    Ok(out)
}
