//! Adapter for emissions-tracker logs (`timestamp,duration,energy_consumed`,
//! energy in kWh, cumulative within a run).

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::dataset::TrialRecord;
use crate::error::{AuditError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackerReading {
    pub timestamp: String,
    pub duration_s: f64,
    /// Cumulative energy at this reading.
    pub energy_kwh: f64,
    pub emissions_kg: Option<f64>,
}

fn parse_err(row: usize, column: &str, message: impl Into<String>) -> AuditError {
    AuditError::Parse {
        row,
        column: column.into(),
        message: message.into(),
    }
}

pub fn read_tracker_log<R: Read>(rdr: R) -> Result<Vec<TrackerReading>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(rdr);
    let headers = rdr.headers().map_err(|e| parse_err(0, "*", e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| {
        find(name).ok_or_else(|| AuditError::MissingColumn {
            column: name.into(),
            near: None,
        })
    };
    let (i_ts, i_dur, i_energy) = (need("timestamp")?, need("duration")?, need("energy_consumed")?);
    let i_em = find("emissions");

    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec.map_err(|e| parse_err(row, "*", e.to_string()))?;
        let num = |i: usize, col: &str| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(row, col, format!("`{s}` is not a finite number")))
        };
        let energy_kwh = num(i_energy, "energy_consumed")?;
        if energy_kwh < 0.0 {
            return Err(parse_err(row, "energy_consumed", "energy must be >= 0 kWh"));
        }
        let emissions_kg = match i_em.and_then(|i| rec.get(i)).filter(|s| !s.is_empty()) {
            Some(_) => Some(num(i_em.unwrap(), "emissions")?),
            None => None,
        };
        out.push(TrackerReading {
            timestamp: rec.get(i_ts).unwrap_or("").to_string(),
            duration_s: num(i_dur, "duration")?,
            energy_kwh,
            emissions_kg,
        });
    }
    Ok(out)
}

pub fn ingest_tracker_log(path: impl AsRef<Path>) -> Result<Vec<TrackerReading>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| AuditError::io(path, e))?;
    read_tracker_log(f)
}

/// Consecutive cumulative readings as `(e_start_kwh, e_end_kwh)` pairs; the
/// first interval starts at `baseline_kwh`.
pub fn snapshot_pairs(readings: &[TrackerReading], baseline_kwh: f64) -> Result<Vec<(f64, f64)>> {
    let mut prev = baseline_kwh;
    let mut out = Vec::with_capacity(readings.len());
    for r in readings {
        if r.energy_kwh < prev {
            return Err(AuditError::Monotonicity {
                start_kwh: prev,
                end_kwh: r.energy_kwh,
            });
        }
        out.push((prev, r.energy_kwh));
        prev = r.energy_kwh;
    }
    Ok(out)
}

/// Assigns snapshot pairs to trials in ascending prompt order, one reading
/// per trial.
pub fn attach_snapshots(trials: &mut [TrialRecord], pairs: &[(f64, f64)]) -> Result<()> {
    if trials.len() != pairs.len() {
        return Err(AuditError::Pairing(format!(
            "{} trials but {} tracker readings",
            trials.len(),
            pairs.len()
        )));
    }
    trials.sort_by_key(|t| t.prompt_id);
    for (t, (a, b)) in trials.iter_mut().zip(pairs) {
        t.e_start_kwh = Some(*a);
        t.e_end_kwh = Some(*b);
    }
    Ok(())
}
