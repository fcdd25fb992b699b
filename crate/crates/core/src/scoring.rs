//! Aggregation of rater scores into per-response pedagogical quality.
//!
//! Each dimension score blends the human and AI panel means
//! (`W_d = hw * H_d + aw * A_d`) and quality is the dimension-weighted sum of
//! the blended scores. Means are taken over present scores only.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dimension, RaterType, ScoreMatrix};
use crate::error::{AuditError, Result};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Which rater groups feed the blended dimension score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    HumanOnly,
    AiOnly,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregationScheme {
    pub id: String,
    pub human_weight: f64,
    /// Weights in `CA, CC, SQ, LA` order.
    pub dimension_weights: [f64; 4],
    pub mode: AggregationMode,
}

impl AggregationScheme {
    pub fn new(id: impl Into<String>, human_weight: f64, dimension_weights: [f64; 4], mode: AggregationMode) -> Result<Self> {
        let id = id.into();
        if !(0.0..=1.0).contains(&human_weight) {
            return Err(AuditError::domain(format!(
                "scheme {id}: human_weight must lie in [0, 1], got {human_weight}"
            )));
        }
        if dimension_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(AuditError::domain(format!(
                "scheme {id}: dimension weights must be non-negative, got {dimension_weights:?}"
            )));
        }
        let sum: f64 = dimension_weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(AuditError::domain(format!(
                "scheme {id}: dimension weights sum to {sum}, expected 1"
            )));
        }
        Ok(AggregationScheme {
            id,
            human_weight,
            dimension_weights,
            mode,
        })
    }

    pub fn ai_weight(&self) -> f64 {
        1.0 - self.human_weight
    }

    pub fn weight(&self, d: Dimension) -> f64 {
        self.dimension_weights[d.index()]
    }

    /// 60/40 human/AI blend with equal dimension weights.
    pub fn primary() -> Self {
        Self::weighted("equal", [0.25; 4])
    }

    fn weighted(id: &str, w: [f64; 4]) -> Self {
        AggregationScheme {
            id: id.into(),
            human_weight: 0.6,
            dimension_weights: w,
            mode: AggregationMode::Weighted,
        }
    }

    /// The six dimension-weighting presets, all under the 60/40 blend.
    pub fn weighting_presets() -> Vec<AggregationScheme> {
        vec![
            Self::weighted("equal", [0.25, 0.25, 0.25, 0.25]),
            Self::weighted("ca_sq_heavy", [0.35, 0.15, 0.35, 0.15]),
            Self::weighted("ca_dominant", [0.40, 0.20, 0.25, 0.15]),
            Self::weighted("sq_dominant", [0.25, 0.20, 0.40, 0.15]),
            Self::weighted("la_downweighted", [0.30, 0.30, 0.30, 0.10]),
            Self::weighted("la_upweighted", [0.20, 0.20, 0.20, 0.40]),
        ]
    }

    /// Human-only, AI-only and the 60/40 blend, each with equal dimension weights.
    pub fn rater_presets() -> Vec<AggregationScheme> {
        vec![
            AggregationScheme {
                id: "human_only".into(),
                human_weight: 1.0,
                dimension_weights: [0.25; 4],
                mode: AggregationMode::HumanOnly,
            },
            AggregationScheme {
                id: "ai_only".into(),
                human_weight: 0.0,
                dimension_weights: [0.25; 4],
                mode: AggregationMode::AiOnly,
            },
            AggregationScheme {
                id: "weighted_60_40".into(),
                human_weight: 0.6,
                dimension_weights: [0.25; 4],
                mode: AggregationMode::Weighted,
            },
        ]
    }

    pub fn preset(name: &str) -> Option<AggregationScheme> {
        Self::weighting_presets()
            .into_iter()
            .chain(Self::rater_presets())
            .find(|s| s.id == name)
    }
}

/// Per-dimension group means, `None` where the group left no score.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DimensionMeans(pub [Option<f64>; 4]);

impl DimensionMeans {
    pub fn get(&self, d: Dimension) -> Option<f64> {
        self.0[d.index()]
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(Option::is_some)
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(Option::is_none)
    }

    /// Unweighted mean over the dimensions that are present.
    pub fn overall(&self) -> Option<f64> {
        let present: Vec<f64> = self.0.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    pub prompt_id: u32,
    pub h_bar: DimensionMeans,
    pub a_bar: DimensionMeans,
    /// Blended score per dimension in `CA, CC, SQ, LA` order.
    pub w: [f64; 4],
    pub q_ped: f64,
    pub scheme_id: String,
}

/// Human and AI means per dimension for one prompt.
pub fn rater_means(scores: &ScoreMatrix, prompt_id: u32) -> Result<(DimensionMeans, DimensionMeans)> {
    let mut sums = [[0.0f64; 4]; 2];
    let mut counts = [[0u32; 4]; 2];
    for e in scores.entries_for(prompt_id) {
        if let Some(s) = e.score {
            let g = match e.rater_type {
                RaterType::Human => 0,
                RaterType::Ai => 1,
            };
            sums[g][e.dimension.index()] += f64::from(s);
            counts[g][e.dimension.index()] += 1;
        }
    }
    let mean = |g: usize| {
        let mut out = [None; 4];
        for d in 0..4 {
            if counts[g][d] > 0 {
                out[d] = Some(sums[g][d] / f64::from(counts[g][d]));
            }
        }
        DimensionMeans(out)
    };
    let (h, a) = (mean(0), mean(1));
    if h.is_empty() && a.is_empty() {
        return Err(AuditError::MissingData(format!(
            "no scores for prompt {prompt_id} in config {}",
            scores.config_id()
        )));
    }
    Ok((h, a))
}

pub fn weighted_quality(
    prompt_id: u32,
    h_bar: DimensionMeans,
    a_bar: DimensionMeans,
    scheme: &AggregationScheme,
) -> Result<QualityProfile> {
    let missing = |group: &str, d: Dimension| {
        AuditError::MissingData(format!(
            "prompt {prompt_id}: no {group} score on {d} (scheme {})",
            scheme.id
        ))
    };
    let mut w = [0.0; 4];
    for d in Dimension::ALL {
        w[d.index()] = match scheme.mode {
            AggregationMode::HumanOnly => h_bar.get(d).ok_or_else(|| missing("human", d))?,
            AggregationMode::AiOnly => a_bar.get(d).ok_or_else(|| missing("AI", d))?,
            AggregationMode::Weighted => {
                let h = h_bar.get(d).ok_or_else(|| missing("human", d))?;
                let a = a_bar.get(d).ok_or_else(|| missing("AI", d))?;
                scheme.human_weight * h + scheme.ai_weight() * a
            }
        };
    }
    let q_ped = Dimension::ALL.iter().map(|d| scheme.weight(*d) * w[d.index()]).sum();
    Ok(QualityProfile {
        prompt_id,
        h_bar,
        a_bar,
        w,
        q_ped,
        scheme_id: scheme.id.clone(),
    })
}

/// Quality profiles for every prompt in the matrix, ascending by prompt id.
pub fn quality_profiles(scores: &ScoreMatrix, scheme: &AggregationScheme) -> Result<Vec<QualityProfile>> {
    scores
        .prompt_ids()
        .map(|pid| {
            let (h, a) = rater_means(scores, pid)?;
            weighted_quality(pid, h, a, scheme).map_err(|e| match e {
                AuditError::MissingData(m) => AuditError::MissingData(format!("config {}: {m}", scores.config_id())),
                e => e,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scheme_id: String,
    pub config_id: String,
    pub mean_q_ped: f64,
    pub n: usize,
}

/// Mean quality per `(scheme, config)`, schemes in the given order and
/// configs in id order.
pub fn scheme_sweep(scores: &BTreeMap<String, ScoreMatrix>, schemes: &[AggregationScheme]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for scheme in schemes {
        for (config_id, m) in scores {
            let profiles = quality_profiles(m, scheme)?;
            if profiles.is_empty() {
                return Err(AuditError::InsufficientData(format!("config {config_id} has no scored prompts")));
            }
            let mean = profiles.iter().map(|p| p.q_ped).sum::<f64>() / profiles.len() as f64;
            rows.push(SweepRow {
                scheme_id: scheme.id.clone(),
                config_id: config_id.clone(),
                mean_q_ped: mean,
                n: profiles.len(),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ScoreEntry;

    fn entry(pid: u32, rater: &str, rt: RaterType, d: Dimension, s: Option<u8>) -> ScoreEntry {
        ScoreEntry {
            prompt_id: pid,
            rater_id: rater.into(),
            rater_type: rt,
            dimension: d,
            score: s,
        }
    }

    #[test]
    fn constant_human_mean() {
        let entries = (0..10)
            .map(|t| entry(1, &format!("T{t}"), RaterType::Human, Dimension::CA, Some(8)))
            .collect();
        let m = ScoreMatrix::new("c", entries).unwrap();
        let (h, a) = rater_means(&m, 1).unwrap();
        assert_eq!(h.get(Dimension::CA), Some(8.0));
        assert_eq!(a.get(Dimension::CA), None);
    }

    #[test]
    fn mean_skips_missing() {
        let m = ScoreMatrix::new(
            "c",
            vec![
                entry(1, "T1", RaterType::Human, Dimension::CA, Some(8)),
                entry(1, "T2", RaterType::Human, Dimension::CA, Some(9)),
                entry(1, "T3", RaterType::Human, Dimension::CA, None),
                entry(1, "G", RaterType::Ai, Dimension::CC, Some(8)),
                entry(1, "C", RaterType::Ai, Dimension::CC, Some(9)),
                entry(1, "M", RaterType::Ai, Dimension::CC, Some(10)),
            ],
        )
        .unwrap();
        let (h, a) = rater_means(&m, 1).unwrap();
        assert_eq!(h.get(Dimension::CA), Some(8.5));
        assert_eq!(a.get(Dimension::CC), Some(9.0));
    }

    #[test]
    fn no_scores_is_missing_data() {
        let m = ScoreMatrix::new("c", vec![entry(1, "T1", RaterType::Human, Dimension::CA, None)]).unwrap();
        assert!(matches!(rater_means(&m, 1), Err(AuditError::MissingData(_))));
        assert!(matches!(rater_means(&m, 2), Err(AuditError::MissingData(_))));
    }

    #[test]
    fn blend_sixty_forty() {
        let h = DimensionMeans([Some(8.0); 4]);
        let a = DimensionMeans([Some(9.0); 4]);
        let p = weighted_quality(1, h, a, &AggregationScheme::primary()).unwrap();
        for w in p.w {
            assert!((w - 8.4).abs() < 1e-12);
        }
        assert!((p.q_ped - 8.4).abs() < 1e-12);
    }

    #[test]
    fn human_only_equal_weights() {
        let h = DimensionMeans([Some(8.0), Some(9.0), Some(7.0), Some(9.0)]);
        let s = AggregationScheme::preset("human_only").unwrap();
        let p = weighted_quality(1, h, DimensionMeans::default(), &s).unwrap();
        assert!((p.q_ped - 8.25).abs() < 1e-12);
        let ai = AggregationScheme::preset("ai_only").unwrap();
        assert!(matches!(
            weighted_quality(1, h, DimensionMeans::default(), &ai),
            Err(AuditError::MissingData(_))
        ));
    }

    #[test]
    fn scheme_validation() {
        assert!(AggregationScheme::new("x", 0.6, [0.3, 0.3, 0.3, 0.3], AggregationMode::Weighted).is_err());
        assert!(AggregationScheme::new("x", 1.2, [0.25; 4], AggregationMode::Weighted).is_err());
        assert!(AggregationScheme::new("x", 0.5, [-0.25, 0.5, 0.5, 0.25], AggregationMode::Weighted).is_err());
        for s in AggregationScheme::weighting_presets().into_iter().chain(AggregationScheme::rater_presets()) {
            AggregationScheme::new(s.id.clone(), s.human_weight, s.dimension_weights, s.mode).unwrap();
        }
    }

    #[test]
    fn ceiling_fixed_point() {
        let mut entries = Vec::new();
        for pid in 1..=3 {
            for (r, rt) in [("T1", RaterType::Human), ("T2", RaterType::Human), ("G", RaterType::Ai)] {
                for d in Dimension::ALL {
                    entries.push(entry(pid, r, rt, d, Some(10)));
                }
            }
        }
        let mut scores = BTreeMap::new();
        scores.insert("c".to_string(), ScoreMatrix::new("c", entries).unwrap());
        let schemes: Vec<_> = AggregationScheme::weighting_presets()
            .into_iter()
            .chain(AggregationScheme::rater_presets())
            .collect();
        let rows = scheme_sweep(&scores, &schemes).unwrap();
        assert_eq!(rows.len(), 9);
        for r in rows {
            assert!((r.mean_q_ped - 10.0).abs() < 1e-12, "{r:?}");
        }
    }
}
