//! Paired-sample inference for configuration comparisons: paired t,
//! Wilcoxon signed-rank and paired Cohen's d. All tests are two-sided.

use serde::Serialize;

use crate::dataset::{Category, Dimension};
use crate::error::{AuditError, Result};
use crate::special::{erfc, student_t_quantile, student_t_two_sided};

/// Largest number of non-zero differences for which the Wilcoxon null
/// distribution is enumerated exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedT {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub t: f64,
    pub df: usize,
    pub p_two_sided: f64,
    pub ci95: (f64, f64),
    /// Mean difference over the standard deviation of differences.
    pub cohens_d: f64,
}

pub fn paired_t(diffs: &[f64]) -> Result<PairedT> {
    let n = diffs.len();
    if n < 2 {
        return Err(AuditError::InsufficientData(format!("paired t needs at least 2 pairs, got {n}")));
    }
    if diffs.iter().all(|d| *d == diffs[0]) {
        return Err(AuditError::Degenerate(format!(
            "all {n} differences equal {}; standard deviation is zero",
            diffs[0]
        )));
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let se = sd / nf.sqrt();
    let t = mean / se;
    let df = n - 1;
    let t_crit = student_t_quantile(0.975, df as f64);
    Ok(PairedT {
        n,
        mean,
        sd,
        t,
        df,
        p_two_sided: student_t_two_sided(t, df as f64),
        ci95: (mean - t_crit * se, mean + t_crit * se),
        cohens_d: mean / sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    /// Exact when at most [`WILCOXON_EXACT_MAX_N`] non-zero differences.
    Auto,
    Exact,
    /// Normal approximation with tie-corrected variance and continuity correction.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Wilcoxon {
    /// Smaller of the two signed rank sums.
    pub w: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Differences left after dropping zeros.
    pub n_effective: usize,
    pub zeros_dropped: usize,
    pub p_two_sided: f64,
    pub method: WilcoxonMethod,
}

/// Midranks of `|d|`, returned doubled so that ties stay integral.
fn doubled_midranks(abs: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&i, &j| abs[i].total_cmp(&abs[j]));
    let mut ranks = vec![0u64; abs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share (i+1 + j+1) / 2; doubled that is i + j + 2
        let r2 = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = r2;
        }
        i = j + 1;
    }
    ranks
}

/// Wilcoxon signed-rank test; zero differences are dropped and ties share
/// midranks.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<Wilcoxon> {
    wilcoxon_signed_rank_with(diffs, WilcoxonMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(diffs: &[f64], method: WilcoxonMethod) -> Result<Wilcoxon> {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let zeros_dropped = diffs.len() - nonzero.len();
    if nonzero.is_empty() {
        return Err(AuditError::Degenerate(format!(
            "all {} differences are zero",
            diffs.len()
        )));
    }
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks2 = doubled_midranks(&abs);
    let plus2: u64 = nonzero.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total2: u64 = ranks2.iter().sum();
    let minus2 = total2 - plus2;
    let w_plus = plus2 as f64 / 2.0;
    let w_minus = minus2 as f64 / 2.0;

    let method = match method {
        WilcoxonMethod::Auto if n <= WILCOXON_EXACT_MAX_N => WilcoxonMethod::Exact,
        WilcoxonMethod::Auto => WilcoxonMethod::Normal,
        m => m,
    };
    let p = match method {
        WilcoxonMethod::Exact => exact_p(&ranks2, plus2),
        _ => normal_p(&abs, w_plus),
    };
    Ok(Wilcoxon {
        w: w_plus.min(w_minus),
        w_plus,
        w_minus,
        n_effective: n,
        zeros_dropped,
        p_two_sided: p.min(1.0),
        method,
    })
}

/// Fraction of the `2^n` sign assignments whose rank sum lies at least as far
/// from its null mean as the observed one.
fn exact_p(ranks2: &[u64], plus2: u64) -> f64 {
    let total2: u64 = ranks2.iter().sum();
    // counts[s] = number of sign patterns with doubled positive-rank sum s
    let mut counts = vec![0u64; total2 as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let observed_dev = (2 * plus2 as i64 - total2 as i64).abs();
    let extreme: u64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (2 * *s as i64 - total2 as i64).abs() >= observed_dev)
        .map(|(_, c)| c)
        .sum();
    extreme as f64 / 2f64.powi(ranks2.len() as i32)
}

fn normal_p(abs: &[f64], w_plus: f64) -> f64 {
    let n = abs.len() as f64;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let mean = n * (n + 1.0) / 4.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnitValues {
    pub q_ped: f64,
    /// Blended dimension scores in `CA, CC, SQ, LA` order.
    pub w: [f64; 4],
    pub latency_s: f64,
    pub net_j: f64,
    pub lpw: f64,
}

/// One prompt measured under both configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedUnit {
    pub prompt_id: u32,
    pub category: Category,
    pub a: UnitValues,
    pub b: UnitValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueSelector {
    QPed,
    Dimension(Dimension),
    Latency,
    NetEnergy,
    Lpw,
}

impl ValueSelector {
    fn pick(self, v: &UnitValues) -> f64 {
        match self {
            ValueSelector::QPed => v.q_ped,
            ValueSelector::Dimension(d) => v.w[d.index()],
            ValueSelector::Latency => v.latency_s,
            ValueSelector::NetEnergy => v.net_j,
            ValueSelector::Lpw => v.lpw,
        }
    }

    pub fn name(self) -> String {
        match self {
            ValueSelector::QPed => "q_ped".into(),
            ValueSelector::Dimension(d) => format!("W_{d}"),
            ValueSelector::Latency => "latency_s".into(),
            ValueSelector::NetEnergy => "net_j".into(),
            ValueSelector::Lpw => "lpw".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Overall,
    /// One group per rubric dimension, comparing blended dimension scores.
    PerDimension,
    PerCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedComparison {
    pub label: String,
    pub n_pairs: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t_stat: f64,
    pub df: usize,
    pub p_two_sided: f64,
    pub ci95: (f64, f64),
    pub cohens_d: f64,
    pub wilcoxon_w: f64,
    pub wilcoxon_p: f64,
    pub wilcoxon_method: WilcoxonMethod,
}

impl PairedComparison {
    pub fn from_diffs(label: impl Into<String>, diffs: &[f64]) -> Result<Self> {
        let t = paired_t(diffs)?;
        let w = wilcoxon_signed_rank(diffs)?;
        Ok(PairedComparison {
            label: label.into(),
            n_pairs: t.n,
            mean_diff: t.mean,
            sd_diff: t.sd,
            t_stat: t.t,
            df: t.df,
            p_two_sided: t.p_two_sided,
            ci95: t.ci95,
            cohens_d: t.cohens_d,
            wilcoxon_w: w.w,
            wilcoxon_p: w.p_two_sided,
            wilcoxon_method: w.method,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<PairedComparison>,
    pub warnings: Vec<String>,
}

/// Differences are taken as `a - b`. Groups come out in canonical order
/// (overall, CA/CC/SQ/LA, then the five categories); groups with fewer than
/// two pairs or degenerate differences are skipped with a warning.
pub fn compare_slices(units: &[PairedUnit], selector: ValueSelector, groupings: &[Grouping]) -> ComparisonTable {
    let mut groupings = groupings.to_vec();
    groupings.sort();
    groupings.dedup();

    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for g in groupings {
        match g {
            Grouping::Overall => {
                groups.push((
                    format!("overall {}", selector.name()),
                    units.iter().map(|u| selector.pick(&u.a) - selector.pick(&u.b)).collect(),
                ));
            }
            Grouping::PerDimension => {
                for d in Dimension::ALL {
                    let s = ValueSelector::Dimension(d);
                    groups.push((d.to_string(), units.iter().map(|u| s.pick(&u.a) - s.pick(&u.b)).collect()));
                }
            }
            Grouping::PerCategory => {
                for c in Category::ALL {
                    let diffs: Vec<f64> = units
                        .iter()
                        .filter(|u| u.category == c)
                        .map(|u| selector.pick(&u.a) - selector.pick(&u.b))
                        .collect();
                    if diffs.is_empty() {
                        continue;
                    }
                    groups.push((c.to_string(), diffs));
                }
            }
        }
    }

    let mut table = ComparisonTable::default();
    for (label, diffs) in groups {
        if diffs.len() < 2 {
            table
                .warnings
                .push(format!("{label}: skipped, only {} pair(s)", diffs.len()));
            continue;
        }
        match PairedComparison::from_diffs(label.clone(), &diffs) {
            Ok(row) => table.rows.push(row),
            Err(e) => table.warnings.push(format!("{label}: skipped, {e}")),
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_diffs_give_zero_t() {
        let r = paired_t(&[1.0, -1.0, 1.0, -1.0]).unwrap();
        assert_eq!(r.t, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
        assert_eq!(r.cohens_d, 0.0);
    }

    #[test]
    fn one_two_three() {
        let r = paired_t(&[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 3.464_101_615_137_755).abs() < 1e-12);
        assert_eq!(r.df, 2);
        assert!((r.p_two_sided - 0.074_179_900_227_448_53).abs() < 1e-10);
        assert!((r.ci95.0 - -0.484_137_711_719_546).abs() < 1e-9);
        assert!((r.ci95.1 - 4.484_137_711_719_546).abs() < 1e-9);
        assert!((r.cohens_d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_diffs_degenerate() {
        assert!(matches!(paired_t(&[0.3, 0.3, 0.3]), Err(AuditError::Degenerate(_))));
        assert!(matches!(paired_t(&[1.0]), Err(AuditError::InsufficientData(_))));
    }

    #[test]
    fn wilcoxon_midranks() {
        let w = wilcoxon_signed_rank(&[1.0, 2.0, -1.0, 3.0]).unwrap();
        assert_eq!(w.w_plus, 8.5);
        assert_eq!(w.w_minus, 1.5);
        assert_eq!(w.w, 1.5);
        assert_eq!(w.method, WilcoxonMethod::Exact);
        assert!((w.p_two_sided - 0.375).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_all_positive() {
        let w = wilcoxon_signed_rank(&[0.5, 1.5, 2.5]).unwrap();
        assert_eq!(w.w, 0.0);
        assert_eq!(w.p_two_sided, 0.25);
    }

    #[test]
    fn wilcoxon_zero_handling() {
        assert!(matches!(wilcoxon_signed_rank(&[0.0, 0.0]), Err(AuditError::Degenerate(_))));
        let w = wilcoxon_signed_rank(&[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(w.zeros_dropped, 1);
        assert_eq!(w.n_effective, 2);
    }

    #[test]
    fn large_sample_uses_normal() {
        let d: Vec<f64> = (1..=40).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let w = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(w.method, WilcoxonMethod::Normal);
        assert!(w.p_two_sided > 0.0 && w.p_two_sided < 1.0);
    }

    fn unit(pid: u32, cat: Category, qa: f64, qb: f64) -> PairedUnit {
        let v = |q: f64| UnitValues {
            q_ped: q,
            w: [q; 4],
            latency_s: 9.0,
            net_j: 360.0,
            lpw: q / 3240.0,
        };
        PairedUnit {
            prompt_id: pid,
            category: cat,
            a: v(qa),
            b: v(qb),
        }
    }

    #[test]
    fn canonical_group_order() {
        let units: Vec<_> = (0..12)
            .map(|i| {
                let cat = if i < 6 { Category::Science } else { Category::Mathematics };
                unit(i + 1, cat, 8.0 + 0.1 * (i % 4) as f64, 7.9)
            })
            .collect();
        let t = compare_slices(
            &units,
            ValueSelector::QPed,
            &[Grouping::PerCategory, Grouping::Overall, Grouping::PerDimension],
        );
        let labels: Vec<_> = t.rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels, vec!["overall q_ped", "CA", "CC", "SQ", "LA", "Mathematics", "Science"]);
    }

    #[test]
    fn self_comparison_is_degenerate() {
        let units: Vec<_> = (1..=5).map(|i| unit(i, Category::Humanities, 8.0, 8.0)).collect();
        let t = compare_slices(&units, ValueSelector::QPed, &[Grouping::Overall, Grouping::PerCategory]);
        assert!(t.rows.is_empty());
        assert_eq!(t.warnings.len(), 2);
    }
}
