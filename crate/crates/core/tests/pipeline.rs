use std::collections::BTreeMap;

use lpw_core::audit::{run_audit, AuditInputs, AuditOptions};
use lpw_core::dataset::{
    CacheRegime, Category, ConfigDescriptor, Dimension, Precision, RaterType, ScoreEntry, ScoreMatrix, TrialRecord,
};
use lpw_core::report::{fingerprint, render, Format, SectionKind};
use lpw_core::{AuditError, ErrorClass};

fn config(id: &str, precision: Precision) -> ConfigDescriptor {
    ConfigDescriptor {
        config_id: id.into(),
        precision,
        cache_regime: CacheRegime::CacheOn,
        hardware: "T4".into(),
        idle_power_w: 30.0,
    }
}

fn trials(id: &str, base_latency: f64, base_energy: f64) -> Vec<TrialRecord> {
    (1..=15u32)
        .map(|pid| {
            let wobble = f64::from(pid % 4);
            let latency_s = base_latency + wobble;
            TrialRecord {
                config_id: id.into(),
                prompt_id: pid,
                category: Category::ALL[(pid % 5) as usize],
                latency_s,
                e_start_kwh: None,
                e_end_kwh: None,
                gross_j: Some(base_energy + 20.0 * wobble + 30.0 * latency_s),
                net_j: None,
                co2_kg: None,
                prompt: None,
            }
        })
        .collect()
}

fn scores(id: &str, shift: u8) -> ScoreMatrix {
    let raters = [("T1", RaterType::Human), ("T2", RaterType::Human), ("AI1", RaterType::Ai)];
    let mut entries = Vec::new();
    for pid in 1..=15u32 {
        for (r, (rater, kind)) in raters.iter().enumerate() {
            for d in Dimension::ALL {
                let s = 6 + ((pid as usize + r + d.index()) % 4) as u8 - shift.min(1);
                entries.push(ScoreEntry {
                    prompt_id: pid,
                    rater_id: rater.to_string(),
                    rater_type: *kind,
                    dimension: d,
                    score: Some(s),
                });
            }
        }
    }
    ScoreMatrix::new(id, entries).unwrap()
}

fn inputs() -> AuditInputs {
    AuditInputs {
        configs: vec![config("fp16", Precision::Fp16), config("nf4", Precision::Nf4)],
        trials: BTreeMap::from([("fp16".into(), trials("fp16", 9.0, 370.0)), ("nf4".into(), trials("nf4", 13.0, 330.0))]),
        scores: BTreeMap::from([("fp16".into(), scores("fp16", 0)), ("nf4".into(), scores("nf4", 1))]),
        fingerprint: fingerprint([b"fixture".as_slice()]),
    }
}

fn options() -> AuditOptions {
    AuditOptions {
        generated_at: "2025-01-01T00:00:00Z".into(),
        ..AuditOptions::default()
    }
}

#[test]
fn audit_is_deterministic_in_every_format() {
    let a = run_audit(&inputs(), &options()).unwrap();
    let b = run_audit(&inputs(), &options()).unwrap();
    assert_eq!(a, b);
    for f in [Format::Table, Format::Csv, Format::Json] {
        assert_eq!(render(&a, f), render(&b, f));
    }
    for kind in SectionKind::ALL {
        assert!(a.section(kind).is_some(), "missing {}", kind.as_str());
    }
    assert!(!a.insufficient_data);
}

#[test]
fn aggregate_section_reports_both_configs() {
    let r = run_audit(&inputs(), &options()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&render(&r, Format::Json)).unwrap();
    let text = json["sections"]["aggregate"].to_string();
    assert!(text.contains("fp16") && text.contains("nf4"));
    assert_eq!(json["sections"]["aggregate"]["source"], "metrics");
    assert_eq!(json["fingerprint"], r.fingerprint);
}

#[test]
fn empty_dataset_reports_insufficient_data() {
    let inputs = AuditInputs {
        configs: vec![config("fp16", Precision::Fp16)],
        ..AuditInputs::default()
    };
    let r = run_audit(&inputs, &options()).unwrap();
    assert!(r.insufficient_data);
    assert!(r.warnings.iter().any(|w| w.contains("empty")));
}

#[test]
fn scenarios_need_no_data() {
    let opts = AuditOptions {
        sections: vec![SectionKind::Scenarios],
        ..options()
    };
    let r = run_audit(&AuditInputs::default(), &opts).unwrap();
    assert!(!r.insufficient_data);
    let s = r.section(SectionKind::Scenarios).unwrap();
    assert!(!s.tables.is_empty());
}

#[test]
fn missing_scores_fail_in_the_scoring_stage() {
    let mut inputs = inputs();
    inputs.scores.remove("nf4");
    let err = run_audit(&inputs, &options()).unwrap_err();
    match &err {
        AuditError::Stage { stage, .. } => assert_eq!(*stage, "scoring"),
        other => panic!("expected a stage error, got {other:?}"),
    }
    assert!(err.to_string().contains("scoring"));
    assert_eq!(err.class(), ErrorClass::InsufficientData);
}

#[test]
fn input_fingerprint_is_carried_through() {
    let mut other = inputs();
    other.fingerprint = fingerprint([b"fixture2".as_slice()]);
    let a = run_audit(&inputs(), &options()).unwrap();
    let b = run_audit(&other, &options()).unwrap();
    assert_ne!(render(&a, Format::Json), render(&b, Format::Json));
}
