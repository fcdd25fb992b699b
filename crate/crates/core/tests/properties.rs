mod common;

use common::props;
use proptest::prelude::*;

use lpw_core::dataset::{read_trials, write_trials, Category, HeaderMap, TrialRecord};
use lpw_core::inferstat::wilcoxon_signed_rank;
use lpw_core::metrics::interactions_per_charge;
use lpw_core::report::fingerprint;
use lpw_core::scenarios::{power_invariant_ratio, CloudScenario};
use lpw_core::scoring::{weighted_quality, AggregationScheme, DimensionMeans};

fn check(name: &str) {
    let (_, f) = props::ALL.iter().find(|(n, _)| *n == name).expect("known property");
    if let Err(e) = f(&mut props::runner(1000)) {
        panic!("{name}: {e}");
    }
}

#[test]
fn clamp_floor_holds() {
    check("clamp floor");
}

#[test]
fn metric_identities_hold() {
    check("metric identities");
}

#[test]
fn ratios_survive_quality_rescaling() {
    check("quality rescaling invariance");
}

#[test]
fn t_test_equivariance() {
    check("t-test scale equivariance and sign antisymmetry");
}

#[test]
fn reliability_ignores_rater_order() {
    check("alpha/ICC rater permutation invariance");
}

#[test]
fn percentiles_are_monotone() {
    check("percentile monotonicity");
}

#[test]
fn aggregate_is_mean_of_per_trial_values() {
    check("per-trial mean vs ratio of means");
}

fn arb_trial() -> impl Strategy<Value = TrialRecord> {
    (
        1u32..10_000,
        prop::sample::select(Category::ALL.to_vec()),
        0.001..500.0f64,
        prop::option::of(0.0..1e4f64),
        prop::option::of(0.0..1e-2f64),
    )
        .prop_map(|(pid, category, latency_s, net_j, co2_kg)| TrialRecord {
            config_id: "cfg".into(),
            prompt_id: pid,
            category,
            latency_s,
            e_start_kwh: None,
            e_end_kwh: None,
            gross_j: net_j.map(|n| n * 1.5),
            net_j,
            co2_kg,
            prompt: None,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn trials_round_trip_through_csv(mut trials in prop::collection::vec(arb_trial(), 1..20)) {
        trials.sort_by_key(|t| t.prompt_id);
        trials.dedup_by_key(|t| t.prompt_id);
        let mut buf = Vec::new();
        write_trials(&trials, &mut buf).unwrap();
        let back = read_trials(buf.as_slice(), "cfg", &HeaderMap::new()).unwrap();
        prop_assert_eq!(back, trials);
    }

    #[test]
    fn wilcoxon_rank_sums_partition_total(d in prop::collection::vec(-20i32..20, 1..40)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        if let Ok(w) = wilcoxon_signed_rank(&d) {
            let n = w.n_effective as f64;
            prop_assert_eq!(w.w_plus + w.w_minus, n * (n + 1.0) / 2.0);
            prop_assert_eq!(w.w, w.w_plus.min(w.w_minus));
            prop_assert!((0.0..=1.0).contains(&w.p_two_sided));
        }
    }

    #[test]
    fn power_never_enters_the_ratio(lf in 0.1..100.0f64, lq in 0.1..100.0f64, qr in 0.5..1.5f64, p in 1.0..200.0f64) {
        let base = power_invariant_ratio(lf, lq, qr, None).unwrap().lpw_ratio;
        let with_p = power_invariant_ratio(lf, lq, qr, Some(p)).unwrap();
        prop_assert_eq!(base.to_bits(), with_p.lpw_ratio.to_bits());
        let ill = with_p.illustration.unwrap();
        prop_assert!(((ill.lpw_quant / ill.lpw_full) / base - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cloud_lpw_falls_with_energy(e in 0.1..1e5f64, k in 1.001..100.0f64, q in 1.0..10.0f64) {
        let a = CloudScenario::new("a", e, 1.9, q, "").unwrap();
        let b = CloudScenario::new("b", e * k, 1.9, q, "").unwrap();
        prop_assert!(b.lpw() < a.lpw());
    }

    #[test]
    fn interactions_fall_as_energy_rises(wh in 1.0..200.0f64, e in 1.0..5000.0f64) {
        prop_assert!(interactions_per_charge(wh, e * 2.0).unwrap() <= interactions_per_charge(wh, e).unwrap());
    }

    #[test]
    fn quality_stays_on_the_rubric_scale(
        h in prop::array::uniform4(1.0..=10.0f64),
        a in prop::array::uniform4(1.0..=10.0f64),
        idx in 0usize..9,
    ) {
        let schemes: Vec<_> = AggregationScheme::weighting_presets()
            .into_iter()
            .chain(AggregationScheme::rater_presets())
            .collect();
        let scheme = &schemes[idx % schemes.len()];
        let p = weighted_quality(1, DimensionMeans(h.map(Some)), DimensionMeans(a.map(Some)), scheme).unwrap();
        prop_assert!(p.q_ped >= 1.0 - 1e-12 && p.q_ped <= 10.0 + 1e-12);
    }

    #[test]
    fn fingerprint_changes_with_any_byte(bytes in prop::collection::vec(any::<u8>(), 1..200), i in any::<prop::sample::Index>()) {
        let mut other = bytes.clone();
        let k = i.index(other.len());
        other[k] ^= 1;
        prop_assert_ne!(fingerprint([bytes.as_slice()]), fingerprint([other.as_slice()]));
        prop_assert_eq!(fingerprint([bytes.as_slice()]), fingerprint([bytes.clone().as_slice()]));
    }
}
