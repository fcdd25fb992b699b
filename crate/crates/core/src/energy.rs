//! Idle-baseline calibration and per-trial gross/net energy accounting.
//!
//! All arithmetic happens in Joules; kWh appears only at the input boundary.

use serde::{Deserialize, Serialize};

use crate::dataset::TrialRecord;
use crate::error::{AuditError, Result};

/// Joules per kilowatt-hour.
pub const J_PER_KWH: f64 = 3.6e6;

/// Default floor applied to net energy.
pub const DEFAULT_CLAMP_FLOOR_J: f64 = 0.01;

/// Default idle window length in seconds.
pub const DEFAULT_IDLE_WINDOW_S: f64 = 10.0;

pub fn kwh_to_j(kwh: f64) -> f64 {
    kwh * J_PER_KWH
}

pub fn j_to_kwh(j: f64) -> f64 {
    j / J_PER_KWH
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleCalibration {
    pub e_idle_kwh: f64,
    pub t_idle_s: f64,
    pub p_idle_w: f64,
}

impl IdleCalibration {
    /// Builds a calibration from an already known idle power, over the
    /// default 10 s window.
    pub fn from_power(p_idle_w: f64) -> Result<Self> {
        if !(p_idle_w >= 0.0) || !p_idle_w.is_finite() {
            return Err(AuditError::domain(format!("idle power must be >= 0, got {p_idle_w}")));
        }
        Ok(IdleCalibration {
            e_idle_kwh: j_to_kwh(p_idle_w * DEFAULT_IDLE_WINDOW_S),
            t_idle_s: DEFAULT_IDLE_WINDOW_S,
            p_idle_w,
        })
    }
}

/// Average idle power from the energy consumed over an idle window.
pub fn calibrate_idle(e_idle_kwh: f64, t_idle_s: f64) -> Result<IdleCalibration> {
    if !(t_idle_s > 0.0) {
        return Err(AuditError::domain(format!("idle window must be > 0 s, got {t_idle_s}")));
    }
    if !(e_idle_kwh >= 0.0) {
        return Err(AuditError::domain(format!("idle energy must be >= 0 kWh, got {e_idle_kwh}")));
    }
    Ok(IdleCalibration {
        e_idle_kwh,
        t_idle_s,
        p_idle_w: kwh_to_j(e_idle_kwh) / t_idle_s,
    })
}

/// Energy between two cumulative counter snapshots, in Joules.
pub fn gross_energy(e_start_kwh: f64, e_end_kwh: f64) -> Result<f64> {
    if e_end_kwh < e_start_kwh {
        return Err(AuditError::Monotonicity {
            start_kwh: e_start_kwh,
            end_kwh: e_end_kwh,
        });
    }
    Ok(kwh_to_j(e_end_kwh - e_start_kwh))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAccount {
    pub gross_j: f64,
    pub idle_share_j: f64,
    pub net_j: f64,
    pub clamped: bool,
}

/// Subtracts the idle share `P_idle * L` from gross energy and floors the
/// result at `clamp_floor`.
pub fn net_energy(gross_j: f64, cal: &IdleCalibration, latency_s: f64, clamp_floor: f64) -> Result<EnergyAccount> {
    if !(latency_s > 0.0) {
        return Err(AuditError::domain(format!("latency must be > 0 s, got {latency_s}")));
    }
    if !(gross_j >= 0.0) {
        return Err(AuditError::domain(format!("gross energy must be >= 0 J, got {gross_j}")));
    }
    let idle_share_j = cal.p_idle_w * latency_s;
    let raw = gross_j - idle_share_j;
    let clamped = raw < clamp_floor;
    Ok(EnergyAccount {
        gross_j,
        idle_share_j,
        net_j: if clamped { clamp_floor } else { raw },
        clamped,
    })
}

/// Trials with `gross_j`/`net_j` filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountedTrials {
    /// Ordered by `(config_id, prompt_id)`.
    pub trials: Vec<TrialRecord>,
    /// Prompts whose net energy hit the clamp floor.
    pub clamped: Vec<u32>,
}

impl AccountedTrials {
    pub fn clamp_count(&self) -> usize {
        self.clamped.len()
    }
}

/// Fills in energies using the precedence provided net > provided gross >
/// counter snapshots. A provided net below the floor is raised to it and
/// counted as clamped.
pub fn account_dataset(trials: &[TrialRecord], cal: &IdleCalibration, clamp_floor: f64) -> Result<AccountedTrials> {
    if !(clamp_floor > 0.0) {
        return Err(AuditError::domain(format!("clamp floor must be > 0 J, got {clamp_floor}")));
    }
    let mut out = Vec::with_capacity(trials.len());
    let mut clamped = Vec::new();
    for t in trials {
        let mut t = t.clone();
        if let Some(net) = t.net_j {
            if net < clamp_floor {
                t.net_j = Some(clamp_floor);
                clamped.push(t.prompt_id);
            }
        } else {
            let gross = match (t.gross_j, t.e_start_kwh, t.e_end_kwh) {
                (Some(g), _, _) => g,
                (None, Some(a), Some(b)) => gross_energy(a, b)?,
                _ => return Err(AuditError::IncompleteEnergy { prompt_id: t.prompt_id }),
            };
            let acct = net_energy(gross, cal, t.latency_s, clamp_floor)?;
            t.gross_j = Some(gross);
            t.net_j = Some(acct.net_j);
            if acct.clamped {
                clamped.push(t.prompt_id);
            }
        }
        out.push(t);
    }
    out.sort_by(|a, b| (&a.config_id, a.prompt_id).cmp(&(&b.config_id, b.prompt_id)));
    clamped.sort_unstable();
    Ok(AccountedTrials { trials: out, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Category;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn idle_power_from_window() {
        let c = calibrate_idle(81.7 * 10.0 / 3.6e6, 10.0).unwrap();
        assert!(close(c.p_idle_w, 81.7, 1e-9));
        let c = calibrate_idle(2.269e-4, 10.0).unwrap();
        assert!(close(c.p_idle_w, 81.684, 1e-9));
        assert_eq!(calibrate_idle(0.0, 10.0).unwrap().p_idle_w, 0.0);
        assert!(calibrate_idle(1.0, 0.0).is_err());
    }

    #[test]
    fn gross_from_snapshots() {
        assert!(close(gross_energy(0.001000, 0.001102).unwrap(), 367.2, 1e-9));
        assert_eq!(gross_energy(0.5, 0.5).unwrap(), 0.0);
        assert!(matches!(gross_energy(0.2, 0.1), Err(AuditError::Monotonicity { .. })));
    }

    #[test]
    fn net_subtracts_idle_share() {
        let cal = IdleCalibration::from_power(81.7).unwrap();
        let a = net_energy(367.2, &cal, 3.0, DEFAULT_CLAMP_FLOOR_J).unwrap();
        assert!(close(a.net_j, 122.1, 1e-9));
        assert!(!a.clamped);

        let a = net_energy(100.0, &cal, 1.5, DEFAULT_CLAMP_FLOOR_J).unwrap();
        assert_eq!(a.net_j, 0.01);
        assert!(a.clamped);
        assert!(close(a.gross_j - a.idle_share_j, -22.55, 1e-9));

        let zero = IdleCalibration::from_power(0.0).unwrap();
        assert_eq!(net_energy(42.0, &zero, 2.0, 0.01).unwrap().net_j, 42.0);
        assert!(net_energy(42.0, &zero, 0.0, 0.01).is_err());
    }

    fn trial(id: u32) -> TrialRecord {
        TrialRecord {
            config_id: "fp16".into(),
            prompt_id: id,
            category: Category::Mathematics,
            latency_s: 3.0,
            e_start_kwh: None,
            e_end_kwh: None,
            gross_j: None,
            net_j: None,
            co2_kg: None,
            prompt: None,
        }
    }

    #[test]
    fn precedence_and_incompleteness() {
        let cal = IdleCalibration::from_power(81.7).unwrap();
        let mut provided = trial(1);
        provided.net_j = Some(372.9);
        provided.gross_j = Some(1.0);
        let mut snaps = trial(2);
        snaps.e_start_kwh = Some(0.001);
        snaps.e_end_kwh = Some(0.001102);
        let out = account_dataset(&[snaps.clone(), provided.clone()], &cal, 0.01).unwrap();
        assert_eq!(out.trials[0].net_j, Some(372.9));
        assert_eq!(out.trials[0].gross_j, Some(1.0));
        assert!(close(out.trials[1].net_j.unwrap(), 122.1, 1e-9));
        assert!(out.clamped.is_empty());

        let err = account_dataset(&[trial(9)], &cal, 0.01).unwrap_err();
        assert!(matches!(err, AuditError::IncompleteEnergy { prompt_id: 9 }));
    }

    #[test]
    fn provided_net_below_floor_is_raised() {
        let cal = IdleCalibration::from_power(0.0).unwrap();
        let mut t = trial(4);
        t.net_j = Some(-3.0);
        let out = account_dataset(&[t], &cal, 0.01).unwrap();
        assert_eq!(out.trials[0].net_j, Some(0.01));
        assert_eq!(out.clamped, vec![4]);
    }
}
