//! Closed-form deployment scenarios: cloud server-energy LpW and the
//! power-invariant laptop quantisation ratio.

use serde::Serialize;

use crate::error::{AuditError, Result};
use crate::report::sig_fixed;

/// Quality assumed for cloud responses and illustrative laptop figures.
pub const REFERENCE_Q_PED: f64 = 8.24;

/// Round-trip latency assumed for a short cloud query, in seconds.
pub const CLOUD_LATENCY_S: f64 = 1.9;

/// Single-user energy multiplier relative to a batch of 8.
pub const BATCH_ONE_FACTOR: f64 = 1.6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudScenario {
    pub name: String,
    pub server_energy_j: f64,
    pub latency_s: f64,
    pub q_ped_assumed: f64,
    pub source: String,
}

impl CloudScenario {
    pub fn new(
        name: impl Into<String>,
        server_energy_j: f64,
        latency_s: f64,
        q_ped_assumed: f64,
        source: impl Into<String>,
    ) -> Result<Self> {
        let name = name.into();
        if !(server_energy_j > 0.0) || !server_energy_j.is_finite() {
            return Err(AuditError::domain(format!("scenario {name}: energy must be > 0 J, got {server_energy_j}")));
        }
        if !(latency_s > 0.0) || !latency_s.is_finite() {
            return Err(AuditError::domain(format!("scenario {name}: latency must be > 0 s, got {latency_s}")));
        }
        if !(1.0..=10.0).contains(&q_ped_assumed) {
            return Err(AuditError::domain(format!(
                "scenario {name}: assumed quality must lie in [1, 10], got {q_ped_assumed}"
            )));
        }
        Ok(CloudScenario {
            name,
            server_energy_j,
            latency_s,
            q_ped_assumed,
            source: source.into(),
        })
    }

    pub fn lpw(&self) -> f64 {
        self.q_ped_assumed / (self.server_energy_j * self.latency_s)
    }
}

/// Energy scaled by a batch-size correction factor.
pub fn batch_adjust(server_energy_j: f64, batch_factor: f64) -> Result<f64> {
    if !(server_energy_j > 0.0) {
        return Err(AuditError::domain(format!("energy must be > 0 J, got {server_energy_j}")));
    }
    if !(batch_factor > 0.0) || !batch_factor.is_finite() {
        return Err(AuditError::domain(format!("batch factor must be > 0, got {batch_factor}")));
    }
    Ok(server_energy_j * batch_factor)
}

/// The five built-in server-energy scenarios, from lowest to highest energy.
pub fn cloud_presets() -> Vec<CloudScenario> {
    let short = 1550.0;
    let rows = [
        ("client_side_only", 1.0, "client-side measurement only (lower bound)"),
        ("gpt4o_short", short, "Jegham et al. 2025, short prompt"),
        (
            "gpt4o_batch_adjusted",
            short * BATCH_ONE_FACTOR,
            "Jegham et al. 2025, batch size 1",
        ),
        ("bloom_176b", 3384.0, "Luccioni et al. 2023"),
        ("gpt4o_medium", 34956.0, "Jegham et al. 2025, medium prompt"),
    ];
    rows.iter()
        .map(|(name, e, src)| {
            CloudScenario::new(*name, *e, CLOUD_LATENCY_S, REFERENCE_Q_PED, *src).expect("preset is valid")
        })
        .collect()
}

pub fn cloud_preset(name: &str) -> Option<CloudScenario> {
    cloud_presets().into_iter().find(|s| s.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudComparison {
    pub reference: String,
    pub reference_lpw: f64,
    /// Scenario LpW over reference LpW.
    pub ratio: f64,
    /// e.g. `1.12x higher` or `0.700x (lower)`.
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudEvaluation {
    pub scenario: CloudScenario,
    pub lpw: f64,
    pub comparisons: Vec<CloudComparison>,
}

pub fn ratio_phrase(ratio: f64) -> String {
    let r = sig_fixed(ratio, 3);
    if ratio > 1.0 {
        format!("{r}x higher")
    } else if ratio < 1.0 {
        format!("{r}x (lower)")
    } else {
        format!("{r}x (equal)")
    }
}

pub fn evaluate_cloud(scenario: &CloudScenario, references: &[(String, f64)]) -> Result<CloudEvaluation> {
    if references.is_empty() {
        return Err(AuditError::domain("cloud scenario needs at least one reference LpW"));
    }
    let lpw = scenario.lpw();
    let comparisons = references
        .iter()
        .map(|(name, r)| {
            if !(*r > 0.0) || !r.is_finite() {
                return Err(AuditError::domain(format!("reference {name} LpW must be > 0, got {r}")));
            }
            let ratio = lpw / r;
            Ok(CloudComparison {
                reference: name.clone(),
                reference_lpw: *r,
                ratio,
                phrase: ratio_phrase(ratio),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CloudEvaluation {
        scenario: scenario.clone(),
        lpw,
        comparisons,
    })
}

/// Absolute figures under an assumed constant device power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerIllustration {
    pub assumed_power_w: f64,
    pub e_full_j: f64,
    pub e_quant_j: f64,
    pub lpw_full: f64,
    pub lpw_quant: f64,
    pub q_reference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerInvariantComparison {
    pub l_full_s: f64,
    pub l_quant_s: f64,
    /// Quantised quality over full-precision quality.
    pub quality_ratio: f64,
    /// Quantised LpW over full-precision LpW.
    pub lpw_ratio: f64,
    pub illustration: Option<PowerIllustration>,
}

/// Under equal device power `E = P * L`, so the LpW ratio reduces to
/// `quality_ratio * (l_full / l_quant)^2` and power never enters it.
pub fn power_invariant_ratio(
    l_full_s: f64,
    l_quant_s: f64,
    quality_ratio: f64,
    assumed_power_w: Option<f64>,
) -> Result<PowerInvariantComparison> {
    for (name, v) in [("full-precision latency", l_full_s), ("quantised latency", l_quant_s), ("quality ratio", quality_ratio)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(AuditError::domain(format!("{name} must be > 0, got {v}")));
        }
    }
    let lpw_ratio = quality_ratio * (l_full_s / l_quant_s).powi(2);
    let illustration = match assumed_power_w {
        None => None,
        Some(p) => {
            if !(p > 0.0) || !p.is_finite() {
                return Err(AuditError::domain(format!("assumed power must be > 0 W, got {p}")));
            }
            let e_full_j = p * l_full_s;
            let e_quant_j = p * l_quant_s;
            Some(PowerIllustration {
                assumed_power_w: p,
                e_full_j,
                e_quant_j,
                lpw_full: REFERENCE_Q_PED / (e_full_j * l_full_s),
                lpw_quant: REFERENCE_Q_PED * quality_ratio / (e_quant_j * l_quant_s),
                q_reference: REFERENCE_Q_PED,
            })
        }
    };
    Ok(PowerInvariantComparison {
        l_full_s,
        l_quant_s,
        quality_ratio,
        lpw_ratio,
        illustration,
    })
}
