//! Text key-value run configuration.
//!
//! ```text
//! # one block per configuration; each `config_id` line starts a new block
//! config_id = fp16
//! precision = FP16
//! cache_regime = cache_on
//! hardware = NVIDIA T4
//! idle_power_w = 81.7
//!
//! # dotted keys address a configuration directly
//! config.nf4.precision = NF4
//! config.nf4.idle_energy_kwh = 2.269e-4
//! config.nf4.idle_window_s = 10
//!
//! clamp_floor_j = 0.01
//! battery_wh = 50
//! thresholds = 10,15,30
//! column.latency = latency_s
//! scheme.strict.human_weight = 0.8
//! scheme.strict.weights = 0.4,0.2,0.25,0.15
//! scenario.edge_server.energy_j = 900
//! scenario.edge_server.latency_s = 2.5
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::dataset::{CacheRegime, ConfigDescriptor, Precision};
use crate::energy::{calibrate_idle, DEFAULT_IDLE_WINDOW_S};
use crate::error::{AuditError, Result};
use crate::scenarios::{CloudScenario, CLOUD_LATENCY_S, REFERENCE_Q_PED};
use crate::scoring::{AggregationMode, AggregationScheme};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSettings {
    /// In order of first appearance.
    pub configs: Vec<ConfigDescriptor>,
    pub clamp_floor_j: Option<f64>,
    pub battery_wh: Option<f64>,
    pub thresholds_s: Option<Vec<f64>>,
    /// `(from, to)` header renames.
    pub column_map: Vec<(String, String)>,
    pub schemes: Vec<AggregationScheme>,
    pub scenarios: Vec<CloudScenario>,
}

#[derive(Default)]
struct ConfigDraft {
    line: usize,
    precision: Option<Precision>,
    cache_regime: Option<CacheRegime>,
    hardware: Option<String>,
    idle_power_w: Option<f64>,
    idle_energy_kwh: Option<f64>,
    idle_window_s: Option<f64>,
}

#[derive(Default)]
struct SchemeDraft {
    line: usize,
    human_weight: Option<f64>,
    weights: Option<[f64; 4]>,
    mode: Option<AggregationMode>,
}

#[derive(Default)]
struct ScenarioDraft {
    line: usize,
    energy_j: Option<f64>,
    latency_s: Option<f64>,
    q_ped: Option<f64>,
    source: Option<String>,
}

fn cfg_err(line: usize, message: impl Into<String>) -> AuditError {
    AuditError::Config {
        line,
        message: message.into(),
    }
}

fn number(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| cfg_err(line, format!("{key}: expected a number, got {v:?}")))
}

fn number_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|p| number(line, key, p.trim())).collect()
}

pub fn read_config_file(path: impl AsRef<Path>) -> Result<RunSettings> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunSettings> {
    let mut settings = RunSettings::default();
    let mut config_order: Vec<String> = Vec::new();
    let mut configs: BTreeMap<String, ConfigDraft> = BTreeMap::new();
    let mut scheme_order: Vec<String> = Vec::new();
    let mut schemes: BTreeMap<String, SchemeDraft> = BTreeMap::new();
    let mut scenario_order: Vec<String> = Vec::new();
    let mut scenarios: BTreeMap<String, ScenarioDraft> = BTreeMap::new();
    let mut current: Option<String> = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got {content:?}")))?;
        if value.is_empty() {
            return Err(cfg_err(line, format!("{key}: empty value")));
        }

        let parts: Vec<&str> = key.split('.').collect();
        match parts.as_slice() {
            ["config_id"] => {
                if configs.contains_key(value) {
                    return Err(cfg_err(line, format!("duplicate config_id {value}")));
                }
                config_order.push(value.to_string());
                configs.insert(value.to_string(), ConfigDraft { line, ..Default::default() });
                current = Some(value.to_string());
            }
            [field @ ("precision" | "cache_regime" | "hardware" | "idle_power_w" | "idle_energy_kwh" | "idle_window_s")] => {
                let id = current
                    .clone()
                    .ok_or_else(|| cfg_err(line, format!("{field} before any config_id")))?;
                set_config_field(configs.get_mut(&id).expect("current config exists"), line, field, value)?;
            }
            ["config", id, field] => {
                let draft = configs.entry(id.to_string()).or_insert_with(|| {
                    config_order.push(id.to_string());
                    ConfigDraft { line, ..Default::default() }
                });
                set_config_field(draft, line, field, value)?;
            }
            ["clamp_floor_j"] => settings.clamp_floor_j = Some(number(line, key, value)?),
            ["battery_wh"] => settings.battery_wh = Some(number(line, key, value)?),
            ["thresholds"] => settings.thresholds_s = Some(number_list(line, key, value)?),
            ["column", from] => settings.column_map.push((from.to_string(), value.to_string())),
            ["scheme", name, field] => {
                let d = schemes.entry(name.to_string()).or_insert_with(|| {
                    scheme_order.push(name.to_string());
                    SchemeDraft { line, ..Default::default() }
                });
                match *field {
                    "human_weight" => d.human_weight = Some(number(line, key, value)?),
                    "weights" => {
                        let w = number_list(line, key, value)?;
                        let w: [f64; 4] = w
                            .try_into()
                            .map_err(|_| cfg_err(line, format!("{key}: expected four weights CA,CC,SQ,LA")))?;
                        d.weights = Some(w);
                    }
                    "mode" => {
                        d.mode = Some(match value {
                            "human_only" => AggregationMode::HumanOnly,
                            "ai_only" => AggregationMode::AiOnly,
                            "weighted" => AggregationMode::Weighted,
                            other => return Err(cfg_err(line, format!("{key}: unknown mode {other:?}"))),
                        })
                    }
                    other => return Err(cfg_err(line, format!("unknown scheme field {other:?}"))),
                }
            }
            ["scenario", name, field] => {
                let d = scenarios.entry(name.to_string()).or_insert_with(|| {
                    scenario_order.push(name.to_string());
                    ScenarioDraft { line, ..Default::default() }
                });
                match *field {
                    "energy_j" => d.energy_j = Some(number(line, key, value)?),
                    "latency_s" => d.latency_s = Some(number(line, key, value)?),
                    "q_ped" => d.q_ped = Some(number(line, key, value)?),
                    "source" => d.source = Some(value.to_string()),
                    other => return Err(cfg_err(line, format!("unknown scenario field {other:?}"))),
                }
            }
            _ => return Err(cfg_err(line, format!("unknown key {key:?}"))),
        }
    }

    for id in config_order {
        let d = configs.remove(&id).expect("ordered id exists");
        let idle_power_w = match (d.idle_power_w, d.idle_energy_kwh) {
            (Some(_), Some(_)) => {
                return Err(cfg_err(d.line, format!("config {id}: give idle_power_w or idle_energy_kwh, not both")))
            }
            (Some(p), None) => p,
            (None, Some(e)) => calibrate_idle(e, d.idle_window_s.unwrap_or(DEFAULT_IDLE_WINDOW_S))
                .map_err(|err| cfg_err(d.line, format!("config {id}: {err}")))?
                .p_idle_w,
            (None, None) => 0.0,
        };
        if idle_power_w < 0.0 {
            return Err(cfg_err(d.line, format!("config {id}: idle_power_w must be >= 0")));
        }
        settings.configs.push(ConfigDescriptor {
            config_id: id.clone(),
            precision: d.precision.unwrap_or_else(|| Precision::parse(&id)),
            cache_regime: d.cache_regime.unwrap_or(CacheRegime::NotApplicable),
            hardware: d.hardware.unwrap_or_default(),
            idle_power_w,
        });
    }

    for name in scheme_order {
        let d = schemes.remove(&name).expect("ordered scheme exists");
        let mode = d.mode.unwrap_or(AggregationMode::Weighted);
        let hw = d.human_weight.unwrap_or(match mode {
            AggregationMode::HumanOnly => 1.0,
            AggregationMode::AiOnly => 0.0,
            AggregationMode::Weighted => 0.6,
        });
        let scheme = AggregationScheme::new(name, hw, d.weights.unwrap_or([0.25; 4]), mode)
            .map_err(|e| cfg_err(d.line, e.to_string()))?;
        settings.schemes.push(scheme);
    }

    for name in scenario_order {
        let d = scenarios.remove(&name).expect("ordered scenario exists");
        let energy = d
            .energy_j
            .ok_or_else(|| cfg_err(d.line, format!("scenario {name}: energy_j is required")))?;
        let s = CloudScenario::new(
            name,
            energy,
            d.latency_s.unwrap_or(CLOUD_LATENCY_S),
            d.q_ped.unwrap_or(REFERENCE_Q_PED),
            d.source.unwrap_or_default(),
        )
        .map_err(|e| cfg_err(d.line, e.to_string()))?;
        settings.scenarios.push(s);
    }
    Ok(settings)
}

fn set_config_field(d: &mut ConfigDraft, line: usize, field: &str, value: &str) -> Result<()> {
    match field {
        "precision" => d.precision = Some(Precision::parse(value)),
        "cache_regime" => {
            d.cache_regime = Some(
                value
                    .parse()
                    .map_err(|_| cfg_err(line, format!("cache_regime: unknown value {value:?}")))?,
            )
        }
        "hardware" => d.hardware = Some(value.to_string()),
        "idle_power_w" => d.idle_power_w = Some(number(line, field, value)?),
        "idle_energy_kwh" => d.idle_energy_kwh = Some(number(line, field, value)?),
        "idle_window_s" => d.idle_window_s = Some(number(line, field, value)?),
        other => return Err(cfg_err(line, format!("unknown config field {other:?}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_and_dotted_keys() {
        let s = parse_config(
            "config_id = fp16\nprecision = FP16\ncache_regime = cache_on\nhardware = T4\nidle_power_w = 81.7\n\n\
             config.nf4.precision = NF4\nconfig.nf4.idle_energy_kwh = 2.269e-4\n\
             thresholds = 10, 20\nbattery_wh = 50 # laptop\n",
        )
        .unwrap();
        assert_eq!(s.configs.len(), 2);
        assert_eq!(s.configs[0].config_id, "fp16");
        assert_eq!(s.configs[0].precision, Precision::Fp16);
        assert_eq!(s.configs[0].cache_regime, CacheRegime::CacheOn);
        assert!((s.configs[1].idle_power_w - 81.684).abs() < 1e-9);
        assert_eq!(s.thresholds_s, Some(vec![10.0, 20.0]));
        assert_eq!(s.battery_wh, Some(50.0));
    }

    #[test]
    fn schemes_and_scenarios() {
        let s = parse_config(
            "scheme.strict.human_weight = 0.8\nscheme.strict.weights = 0.4,0.2,0.25,0.15\n\
             scenario.edge.energy_j = 900\nscenario.edge.source = lab\n",
        )
        .unwrap();
        assert_eq!(s.schemes[0].human_weight, 0.8);
        assert_eq!(s.schemes[0].dimension_weights, [0.4, 0.2, 0.25, 0.15]);
        assert_eq!(s.scenarios[0].latency_s, CLOUD_LATENCY_S);
        assert_eq!(s.scenarios[0].q_ped_assumed, REFERENCE_Q_PED);
    }

    #[test]
    fn errors_cite_lines() {
        let e = parse_config("battery_wh = 50\nprecision = FP16\n").unwrap_err();
        assert!(matches!(e, AuditError::Config { line: 2, .. }));
        let e = parse_config("scheme.x.weights = 0.5,0.5,0.5,0.5\n").unwrap_err();
        assert!(matches!(e, AuditError::Config { line: 1, .. }));
        assert!(parse_config("nonsense\n").is_err());
        assert!(parse_config("config.a.idle_power_w = -1\n").is_err());
    }
}
