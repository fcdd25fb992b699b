//! Property checks driven by an explicit runner so that both the property
//! test target and the acceptance harness can execute them.

use std::collections::BTreeMap;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use lpw_core::dataset::{Category, TrialRecord};
use lpw_core::energy::{net_energy, IdleCalibration, DEFAULT_CLAMP_FLOOR_J};
use lpw_core::inferstat::paired_t;
use lpw_core::metrics::{aggregate, metric_rows, summarize, summarize_rows, trial_metrics, MetricKind, MetricRow};
use lpw_core::reliability::{icc_2_1, krippendorff_alpha_ordinal, score_scale, Coefficient, RatingMatrix};

pub type Check = fn(&mut TestRunner) -> Result<(), String>;

/// Named property checks in reporting order.
pub const ALL: [(&str, Check); 7] = [
    ("clamp floor", clamp_floor),
    ("metric identities", metric_identities),
    ("quality rescaling invariance", quality_rescaling),
    ("t-test scale equivariance and sign antisymmetry", t_equivariance),
    ("alpha/ICC rater permutation invariance", permutation_invariance),
    ("percentile monotonicity", percentile_monotonicity),
    ("per-trial mean vs ratio of means", jensen_regression),
];

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn trial(config: &str, pid: u32, net_j: f64, latency_s: f64) -> TrialRecord {
    TrialRecord {
        config_id: config.into(),
        prompt_id: pid,
        category: Category::Science,
        latency_s,
        e_start_kwh: None,
        e_end_kwh: None,
        gross_j: None,
        net_j: Some(net_j),
        co2_kg: None,
        prompt: None,
    }
}

pub fn clamp_floor(r: &mut TestRunner) -> Result<(), String> {
    let s = (0.0..5000.0f64, 0.0..120.0f64, 0.01..90.0f64);
    r.run(&s, |(gross, p_idle, latency)| {
        let cal = IdleCalibration::from_power(p_idle).unwrap();
        let acct = net_energy(gross, &cal, latency, DEFAULT_CLAMP_FLOOR_J).unwrap();
        let raw = gross - p_idle * latency;
        prop_assert!(acct.net_j >= DEFAULT_CLAMP_FLOOR_J);
        prop_assert_eq!(acct.clamped, raw < DEFAULT_CLAMP_FLOOR_J);
        if !acct.clamped {
            prop_assert_eq!(acct.net_j, raw);
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

pub fn metric_identities(r: &mut TestRunner) -> Result<(), String> {
    let s = (1.0..10.0f64, 0.01..10_000.0f64, 0.01..200.0f64);
    r.run(&s, |(q, e, l)| {
        let m = trial_metrics(q, e, l).unwrap();
        prop_assert!(rel(m.lpw_geo * m.lpw_geo, m.qpj * m.qps) < 1e-10);
        prop_assert!(rel(m.qpj, m.lpw * l) < 1e-10);
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn rows_for(config: &str, data: &[(f64, f64, f64)], scale: f64) -> Vec<MetricRow> {
    let trials: Vec<TrialRecord> = data
        .iter()
        .enumerate()
        .map(|(i, (_, e, l))| trial(config, i as u32 + 1, *e, *l))
        .collect();
    let q: BTreeMap<u32, f64> = data.iter().enumerate().map(|(i, (q, _, _))| (i as u32 + 1, q * scale)).collect();
    metric_rows(&trials, &q).unwrap().rows
}

pub fn quality_rescaling(r: &mut TestRunner) -> Result<(), String> {
    let unit = (1.0..10.0f64, 1.0..2000.0f64, 0.5..60.0f64);
    let s = (
        prop::collection::vec(unit.clone(), 1..30),
        prop::collection::vec(unit, 1..30),
        0.05..20.0f64,
    );
    r.run(&s, |(a, b, c)| {
        for kind in [MetricKind::Lpw, MetricKind::Qpj, MetricKind::Qps, MetricKind::LpwGeo] {
            let ratio = |scale: f64| {
                let ma = summarize_rows(&rows_for("a", &a, scale), "a", kind).unwrap().mean;
                let mb = summarize_rows(&rows_for("b", &b, scale), "b", kind).unwrap().mean;
                ma / mb
            };
            prop_assert!(rel(ratio(c), ratio(1.0)) < 1e-10, "{:?}", kind);
        }
        Ok(())
    })
    .map_err(|e| e.to_string())
}

pub fn t_equivariance(r: &mut TestRunner) -> Result<(), String> {
    let s = (prop::collection::vec(-100.0..100.0f64, 2..40), 1e-3..1e3f64);
    r.run(&s, |(d, c)| {
        let Ok(base) = paired_t(&d) else {
            return Ok(());
        };
        let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
        let negated: Vec<f64> = d.iter().map(|x| -x).collect();
        let s = paired_t(&scaled).unwrap();
        let n = paired_t(&negated).unwrap();
        prop_assert!((s.t - base.t).abs() <= 1e-9 * base.t.abs().max(1.0));
        prop_assert!((s.p_two_sided - base.p_two_sided).abs() < 1e-9);
        prop_assert!((s.cohens_d - base.cohens_d).abs() <= 1e-9 * base.cohens_d.abs().max(1.0));
        prop_assert_eq!(n.t, -base.t);
        prop_assert_eq!(n.p_two_sided, base.p_two_sided);
        prop_assert!((n.ci95.0 + base.ci95.1).abs() <= 1e-9 * base.ci95.1.abs().max(1.0));
        Ok(())
    })
    .map_err(|e| e.to_string())
}

fn coef_close(a: Coefficient, b: Coefficient) -> bool {
    match (a, b) {
        (Coefficient::Defined(x), Coefficient::Defined(y)) => (x - y).abs() < 1e-10,
        (Coefficient::Undefined, Coefficient::Undefined) => true,
        _ => false,
    }
}

pub fn permutation_invariance(r: &mut TestRunner) -> Result<(), String> {
    let s = (2usize..6, 2usize..25).prop_flat_map(|(k, n)| {
        (
            prop::collection::vec(prop::collection::vec(1u8..=10, k), n),
            Just((0..k).collect::<Vec<usize>>()).prop_shuffle(),
        )
    });
    r.run(&s, |(rows, order)| {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| f64::from(*v)).collect()).collect();
        let m = RatingMatrix::complete(&rows).unwrap();
        let p = m.permute_raters(&order);
        let scale = score_scale();
        prop_assert!(coef_close(
            krippendorff_alpha_ordinal(&m, &scale, false).unwrap(),
            krippendorff_alpha_ordinal(&p, &scale, false).unwrap()
        ));
        prop_assert!(coef_close(icc_2_1(&m).unwrap(), icc_2_1(&p).unwrap()));
        Ok(())
    })
    .map_err(|e| e.to_string())
}

pub fn percentile_monotonicity(r: &mut TestRunner) -> Result<(), String> {
    let s = prop::collection::vec(-1e6..1e6f64, 1..200);
    r.run(&s, |v| {
        let s = summarize(&v, "c", "x").unwrap();
        let chain = [s.min, s.p5, s.p25, s.median, s.p75, s.p95, s.max];
        prop_assert!(chain.windows(2).all(|w| w[0] <= w[1]), "{:?}", chain);
        prop_assert!(s.min <= s.mean && s.mean <= s.max);
        Ok(())
    })
    .map_err(|e| e.to_string())
}

/// Two trials at `q = 8.24`, `L = 9.17 s` and energies `368.8 ± 58.77 J`:
/// the mean of per-trial LpW is 2.50e-3 while the ratio of means is
/// 2.44e-3. The reported aggregate must be the former.
pub fn jensen_regression(_: &mut TestRunner) -> Result<(), String> {
    let (q, l, e, x) = (8.24, 9.17, 368.8, 58.77);
    let data = [(q, e - x, l), (q, e + x, l)];
    let rows = rows_for("fp16", &data, 1.0);
    let agg = aggregate(&rows, "fp16", "fp16").map_err(|e| e.to_string())?;
    let ratio_of_means = agg.q_ped / (agg.net_j * agg.latency_s);
    let shown = |v: f64| format!("{v:.2e}");
    if shown(agg.lpw) != "2.50e-3" {
        return Err(format!("mean of per-trial LpW {} does not round to 2.50e-3", agg.lpw));
    }
    if shown(ratio_of_means) != "2.44e-3" {
        return Err(format!("ratio of means {ratio_of_means} does not round to 2.44e-3"));
    }
    if (agg.net_j - e).abs() > 1e-9 || (agg.latency_s - l).abs() > 1e-12 {
        return Err("aggregate energy or latency mean is off".into());
    }
    Ok(())
}
