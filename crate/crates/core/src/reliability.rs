//! Inter-rater reliability and rater-divergence statistics.
//!
//! Zero-variance inputs produce [`Coefficient::Undefined`] rather than a
//! number, so a ceiling-compressed dimension is never confused with one where
//! raters genuinely disagree.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::dataset::{Dimension, RaterType, ScoreMatrix};
use crate::error::{AuditError, Result};
use crate::scoring::rater_means;

/// A reliability or correlation coefficient that may have no defined value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Defined(f64),
    Undefined,
}

impl Coefficient {
    pub fn value(self) -> Option<f64> {
        match self {
            Coefficient::Defined(v) => Some(v),
            Coefficient::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Coefficient::Defined(_))
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Defined(v) => write!(f, "{v:.2}"),
            Coefficient::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Coefficient {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coefficient::Defined(v) => s.serialize_f64(*v),
            Coefficient::Undefined => s.serialize_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RaterGroup {
    Human,
    Ai,
    Combined,
}

impl RaterGroup {
    pub const ALL: [RaterGroup; 3] = [RaterGroup::Human, RaterGroup::Ai, RaterGroup::Combined];

    pub fn includes(self, t: RaterType) -> bool {
        match self {
            RaterGroup::Human => t == RaterType::Human,
            RaterGroup::Ai => t == RaterType::Ai,
            RaterGroup::Combined => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RaterGroup::Human => "human",
            RaterGroup::Ai => "ai",
            RaterGroup::Combined => "combined",
        }
    }
}

/// Items (rows) by raters (columns), missing cells as `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingMatrix {
    rows: Vec<Vec<Option<f64>>>,
    n_raters: usize,
}

impl RatingMatrix {
    pub fn from_rows(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let n_raters = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_raters) {
            return Err(AuditError::domain("rating matrix rows have unequal length"));
        }
        Ok(RatingMatrix { rows, n_raters })
    }

    /// Convenience for complete matrices.
    pub fn complete(rows: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|v| Some(*v)).collect()).collect())
    }

    /// One row per `(prompt, dimension)` unit over the requested dimensions,
    /// one column per rater in the group.
    pub fn from_scores(scores: &ScoreMatrix, group: RaterGroup, dims: &[Dimension]) -> Self {
        let raters: Vec<&str> = scores
            .raters()
            .filter(|(_, t)| group.includes(*t))
            .map(|(id, _)| id)
            .collect();
        let col: BTreeMap<&str, usize> = raters.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let mut rows = Vec::new();
        for pid in scores.prompt_ids() {
            for &d in dims {
                let mut row = vec![None; raters.len()];
                for e in scores.entries_for(pid).filter(|e| e.dimension == d) {
                    if let (Some(&c), Some(s)) = (col.get(e.rater_id.as_str()), e.score) {
                        row[c] = Some(f64::from(s));
                    }
                }
                rows.push(row);
            }
        }
        RatingMatrix {
            rows,
            n_raters: raters.len(),
        }
    }

    pub fn n_items(&self) -> usize {
        self.rows.len()
    }

    pub fn n_raters(&self) -> usize {
        self.n_raters
    }

    pub fn rows(&self) -> &[Vec<Option<f64>>] {
        &self.rows
    }

    /// Same matrix with columns reordered by `order`.
    pub fn permute_raters(&self, order: &[usize]) -> Self {
        RatingMatrix {
            rows: self.rows.iter().map(|r| order.iter().map(|&i| r[i]).collect()).collect(),
            n_raters: order.len(),
        }
    }
}

/// The integer rating scale 1..=10.
pub fn score_scale() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

/// Krippendorff's alpha with the ordinal difference metric.
///
/// Values are paired within each item through the coincidence matrix
/// `o_ck = sum_u (#c,#k pairs in u) / (m_u - 1)`; the ordinal distance between
/// categories `c <= k` is `(sum_{g=c..k} n_g - (n_c + n_k) / 2)^2`. With
/// `allow_missing == false` any item carrying a missing cell is dropped.
pub fn krippendorff_alpha_ordinal(matrix: &RatingMatrix, scale: &[f64], allow_missing: bool) -> Result<Coefficient> {
    if matrix.n_raters() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "alpha needs at least 2 raters, got {}",
            matrix.n_raters()
        )));
    }
    let q = scale.len();
    let cat = |v: f64| -> Result<usize> {
        scale
            .iter()
            .position(|s| *s == v)
            .ok_or_else(|| AuditError::domain(format!("value {v} is not on the rating scale")))
    };

    let mut coincidence = vec![vec![0.0f64; q]; q];
    let mut pairable_units = 0usize;
    for row in matrix.rows() {
        if !allow_missing && row.iter().any(Option::is_none) {
            continue;
        }
        let mut counts = vec![0u32; q];
        let mut m = 0u32;
        for v in row.iter().flatten() {
            counts[cat(*v)?] += 1;
            m += 1;
        }
        if m < 2 {
            continue;
        }
        pairable_units += 1;
        let denom = f64::from(m - 1);
        for c in 0..q {
            if counts[c] == 0 {
                continue;
            }
            for k in 0..q {
                let pairs = if c == k {
                    counts[c] * (counts[c] - 1)
                } else {
                    counts[c] * counts[k]
                };
                coincidence[c][k] += f64::from(pairs) / denom;
            }
        }
    }
    if pairable_units == 0 {
        return Err(AuditError::InsufficientData(
            "no item carries two or more pairable values".into(),
        ));
    }

    let marginals: Vec<f64> = coincidence.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let delta2 = |c: usize, k: usize| -> f64 {
        if c == k {
            return 0.0;
        }
        let (lo, hi) = if c < k { (c, k) } else { (k, c) };
        let span: f64 = marginals[lo..=hi].iter().sum();
        let d = span - (marginals[c] + marginals[k]) / 2.0;
        d * d
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..q {
        for k in 0..q {
            if c == k {
                continue;
            }
            let d = delta2(c, k);
            observed += coincidence[c][k] * d;
            expected += marginals[c] * marginals[k] * d;
        }
    }
    if expected == 0.0 {
        return Ok(Coefficient::Undefined);
    }
    Ok(Coefficient::Defined(1.0 - (n - 1.0) * observed / expected))
}

/// Two-way ANOVA mean squares over a complete items x raters table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnovaMeanSquares {
    pub n_items: usize,
    pub n_raters: usize,
    pub rows: f64,
    pub columns: f64,
    pub error: f64,
}

pub fn two_way_anova(rows: &[Vec<f64>]) -> AnovaMeanSquares {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    let total = (n * k) as f64;
    let grand = rows.iter().flatten().sum::<f64>() / total;
    let row_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / k as f64).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let ss_rows = k as f64 * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = n as f64 * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_total: f64 = rows.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_error = (ss_total - ss_rows - ss_cols).max(0.0);
    AnovaMeanSquares {
        n_items: n,
        n_raters: k,
        rows: ss_rows / (n - 1) as f64,
        columns: ss_cols / (k - 1) as f64,
        error: ss_error / ((n - 1) * (k - 1)) as f64,
    }
}

/// ICC(2,1): single-measure absolute agreement under a two-way random-effects
/// model, on items with every rater present.
pub fn icc_2_1(matrix: &RatingMatrix) -> Result<Coefficient> {
    if matrix.n_raters() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "ICC needs at least 2 raters, got {}",
            matrix.n_raters()
        )));
    }
    let complete: Vec<Vec<f64>> = matrix
        .rows()
        .iter()
        .filter_map(|r| r.iter().copied().collect::<Option<Vec<f64>>>())
        .collect();
    if complete.len() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "ICC needs at least 2 complete items, got {}",
            complete.len()
        )));
    }
    let first = complete[0][0];
    if complete.iter().flatten().all(|v| *v == first) {
        return Ok(Coefficient::Undefined);
    }
    let ms = two_way_anova(&complete);
    let (n, k) = (ms.n_items as f64, ms.n_raters as f64);
    let denom = ms.rows + (k - 1.0) * ms.error + k * (ms.columns - ms.error) / n;
    if !(denom > 0.0) {
        return Ok(Coefficient::Undefined);
    }
    Ok(Coefficient::Defined((ms.rows - ms.error) / denom))
}

/// Pearson correlation; undefined when either series has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Coefficient> {
    if xs.len() != ys.len() {
        return Err(AuditError::domain("pearson: series lengths differ"));
    }
    if xs.len() < 3 {
        return Err(AuditError::InsufficientData(format!(
            "correlation needs at least 3 paired values, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Coefficient::Undefined);
    }
    Ok(Coefficient::Defined((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)))
}

/// What to correlate between the human and AI panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationTarget {
    Dimension(Dimension),
    /// Per-prompt mean across the four dimensions.
    Overall,
}

/// Pearson r between per-prompt human and AI means.
pub fn human_ai_correlation(scores: &ScoreMatrix, target: CorrelationTarget) -> Result<Coefficient> {
    let mut hs = Vec::new();
    let mut ais = Vec::new();
    for pid in scores.prompt_ids() {
        let Ok((h, a)) = rater_means(scores, pid) else { continue };
        let pair = match target {
            CorrelationTarget::Dimension(d) => h.get(d).zip(a.get(d)),
            CorrelationTarget::Overall => h.overall().zip(a.overall()),
        };
        if let Some((x, y)) = pair {
            hs.push(x);
            ais.push(y);
        }
    }
    pearson(&hs, &ais)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityDecomposition {
    pub rater_means: BTreeMap<String, f64>,
    pub rater_variances: BTreeMap<String, f64>,
    /// Sample variance of the rater means.
    pub between_rater_var: f64,
    /// Mean of the per-rater sample variances.
    pub mean_within_rater_var: f64,
    /// `between / within`, absent when within-rater variance is zero.
    pub ratio: Option<f64>,
    /// Raters dropped for having fewer than two scores.
    pub excluded: Vec<String>,
}

/// Splits score variance on one dimension into between-rater (severity) and
/// within-rater components.
pub fn severity_decomposition(scores: &ScoreMatrix, group: RaterGroup, dimension: Dimension) -> Result<SeverityDecomposition> {
    let mut by_rater: BTreeMap<&str, Vec<f64>> = scores
        .raters()
        .filter(|(_, t)| group.includes(*t))
        .map(|(r, _)| (r, Vec::new()))
        .collect();
    for e in scores.entries().iter().filter(|e| e.dimension == dimension) {
        if let (Some(v), Some(s)) = (by_rater.get_mut(e.rater_id.as_str()), e.score) {
            v.push(f64::from(s));
        }
    }
    let mut excluded = Vec::new();
    let mut rater_means = BTreeMap::new();
    let mut rater_variances = BTreeMap::new();
    for (r, xs) in by_rater {
        if xs.len() < 2 {
            excluded.push(r.to_string());
            continue;
        }
        rater_means.insert(r.to_string(), xs.iter().sum::<f64>() / xs.len() as f64);
        rater_variances.insert(r.to_string(), sample_variance(&xs));
    }
    if rater_means.len() < 2 {
        return Err(AuditError::InsufficientData(format!(
            "severity decomposition needs at least 2 raters with 2+ {dimension} scores, got {}",
            rater_means.len()
        )));
    }
    let means: Vec<f64> = rater_means.values().copied().collect();
    let between = sample_variance(&means);
    let within = rater_variances.values().sum::<f64>() / rater_variances.len() as f64;
    Ok(SeverityDecomposition {
        rater_means,
        rater_variances,
        between_rater_var: between,
        mean_within_rater_var: within,
        ratio: (within > 0.0).then(|| between / within),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReliabilityCell {
    pub alpha: Coefficient,
    pub icc21: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub config_id: String,
    pub group: RaterGroup,
    pub per_dimension: Vec<(Dimension, ReliabilityCell)>,
    /// Computed over `(prompt, dimension)` units pooled across all four dimensions.
    pub overall: ReliabilityCell,
    pub n_raters: usize,
    pub n_items: usize,
    pub warnings: Vec<String>,
}

fn cell_of(m: &RatingMatrix, label: &str, warnings: &mut Vec<String>) -> Result<ReliabilityCell> {
    let mut soft = |r: Result<Coefficient>, stat: &str| -> Result<Coefficient> {
        match r {
            Ok(c) => {
                if !c.is_defined() {
                    warnings.push(format!("{label}: {stat} undefined (zero variance)"));
                }
                Ok(c)
            }
            Err(AuditError::InsufficientData(msg)) => {
                warnings.push(format!("{label}: {stat} not computed ({msg})"));
                Ok(Coefficient::Undefined)
            }
            Err(e) => Err(e),
        }
    };
    let alpha = soft(krippendorff_alpha_ordinal(m, &score_scale(), true), "alpha")?;
    let icc21 = soft(icc_2_1(m), "ICC(2,1)")?;
    Ok(ReliabilityCell { alpha, icc21 })
}

/// Alpha and ICC(2,1) per dimension and pooled, for one rater group.
pub fn reliability_report(scores: &ScoreMatrix, group: RaterGroup) -> Result<ReliabilityReport> {
    let mut warnings = Vec::new();
    let mut per_dimension = Vec::new();
    for d in Dimension::ALL {
        let m = RatingMatrix::from_scores(scores, group, &[d]);
        let label = format!("{} {} {d}", scores.config_id(), group.as_str());
        per_dimension.push((d, cell_of(&m, &label, &mut warnings)?));
    }
    let all = RatingMatrix::from_scores(scores, group, &Dimension::ALL);
    let label = format!("{} {} overall", scores.config_id(), group.as_str());
    let overall = cell_of(&all, &label, &mut warnings)?;
    Ok(ReliabilityReport {
        config_id: scores.config_id().to_string(),
        group,
        per_dimension,
        overall,
        n_raters: all.n_raters(),
        n_items: scores.prompt_ids().count(),
        warnings,
    })
}
