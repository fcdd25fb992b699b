//! Brute-force reference implementations used as test oracles. They share
//! no code with the library.

#![allow(dead_code)]

pub mod props;

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Ordinal alpha from its pairwise definition: observed disagreement over
/// ordered value pairs within units, expected disagreement over all ordered
/// pairs of pairable values.
pub fn alpha_pairwise(units: &[Vec<f64>], scale: &[f64]) -> f64 {
    let pairable: Vec<&Vec<f64>> = units.iter().filter(|u| u.len() >= 2).collect();
    let values: Vec<f64> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    let n = values.len() as f64;
    let freq = |g: f64| values.iter().filter(|v| **v == g).count() as f64;
    let delta2 = |a: f64, b: f64| -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let inner: f64 = scale.iter().filter(|g| **g >= lo && **g <= hi).map(|g| freq(*g)).sum();
        let d = inner - (freq(lo) + freq(hi)) / 2.0;
        d * d
    };
    let mut d_o = 0.0;
    for u in &pairable {
        let m = u.len() as f64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j {
                    d_o += delta2(u[i], u[j]) / (m - 1.0);
                }
            }
        }
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i != j {
                d_e += delta2(values[i], values[j]);
            }
        }
    }
    d_e /= n * (n - 1.0);
    1.0 - d_o / d_e
}

/// ICC(2,1) from explicit sums of squares.
pub fn icc21_oracle(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let k = rows[0].len();
    let (nf, kf) = (n as f64, k as f64);
    let grand: f64 = rows.iter().flatten().sum::<f64>() / (nf * kf);
    let sst: f64 = rows.iter().flatten().map(|x| (x - grand).powi(2)).sum();
    let ssr: f64 = rows
        .iter()
        .map(|r| kf * (r.iter().sum::<f64>() / kf - grand).powi(2))
        .sum();
    let ssc: f64 = (0..k)
        .map(|j| nf * (rows.iter().map(|r| r[j]).sum::<f64>() / nf - grand).powi(2))
        .sum();
    let sse = sst - ssr - ssc;
    let msr = ssr / (nf - 1.0);
    let msc = ssc / (kf - 1.0);
    let mse = sse / ((nf - 1.0) * (kf - 1.0));
    (msr - mse) / (msr + (kf - 1.0) * mse + kf * (msc - mse) / nf)
}

/// Midrank of each `|d|`, computed by counting.
fn midranks(abs: &[f64]) -> Vec<f64> {
    abs.iter()
        .map(|a| {
            let less = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// `(W+, W-, two-sided p)` by enumerating all `2^n` sign patterns.
pub fn wilcoxon_enumerated(diffs: &[f64]) -> (f64, f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|x| *x != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let r = midranks(&abs);
    let total: f64 = r.iter().sum();
    let w_plus: f64 = d.iter().zip(&r).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let mean = total / 2.0;
    let observed = (w_plus - mean).abs();
    let n = d.len();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if (s - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    (w_plus, total - w_plus, extreme as f64 / (1u64 << n) as f64)
}

pub fn t_two_sided_statrs(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).unwrap();
    2.0 * (1.0 - dist.cdf(t.abs()))
}

pub fn t_quantile_statrs(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p)
}

/// Two rater columns over four units, scale 1..3.
pub fn small_complete() -> Vec<Vec<f64>> {
    vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![3.0, 2.0]]
}

/// Units with unequal numbers of ratings, scale 1..4.
pub fn small_missing() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, 1.0],
        vec![2.0, 2.0, 3.0],
        vec![3.0, 3.0, 3.0],
        vec![3.0, 2.0, 2.0],
        vec![2.0, 1.0],
        vec![4.0, 4.0, 4.0],
    ]
}

/// Four subjects rated by three raters.
pub fn small_icc() -> Vec<Vec<f64>> {
    vec![
        vec![7.0, 8.0, 9.0],
        vec![5.0, 5.0, 6.0],
        vec![8.0, 9.0, 9.0],
        vec![4.0, 6.0, 5.0],
    ]
}

/// Pads ragged units with missing cells to a rectangular matrix.
pub fn padded(units: &[Vec<f64>]) -> Vec<Vec<Option<f64>>> {
    let k = units.iter().map(Vec::len).max().unwrap_or(0);
    units
        .iter()
        .map(|u| (0..k).map(|i| u.get(i).copied()).collect())
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}
