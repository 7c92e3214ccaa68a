use serde::{Deserialize, Serialize};

use super::telemetry::TelemetryRecord;
use crate::error::{KiteError, Result};
use crate::guidance::CyclePhase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle_index: usize,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "W_out")]
    pub w_out: f64,
    #[serde(rename = "W_in")]
    pub w_in: f64,
    #[serde(rename = "P_bar_cycle")]
    pub p_bar_cycle: f64,
    #[serde(rename = "F_peak")]
    pub f_peak: f64,
    pub v_a_min: f64,
}

/// Indices where the phase goes from restart back to power.
pub fn cycle_boundaries(records: &[TelemetryRecord]) -> Vec<usize> {
    (1..records.len())
        .filter(|&i| records[i - 1].phase == CyclePhase::Restart && records[i].phase.is_power())
        .collect()
}

/// Split telemetry into complete cycles and integrate the energy of each.
/// Every sample carries the time until the next one.
pub fn energy_accounting(records: &[TelemetryRecord]) -> Result<Vec<CycleReport>> {
    let bounds = cycle_boundaries(records);
    if bounds.len() < 2 {
        return Err(KiteError::NoCompleteCycle);
    }
    Ok(bounds
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let (start, end) = (w[0], w[1]);
            let (mut w_out, mut w_in) = (0.0, 0.0);
            let mut f_peak = 0.0_f64;
            let mut v_a_min = f64::INFINITY;
            for i in start..end {
                let r = &records[i];
                let e = r.p_mech * (records[i + 1].t - r.t);
                if r.p_mech > 0.0 {
                    w_out += e;
                } else {
                    w_in += e;
                }
                f_peak = f_peak.max(r.force);
                v_a_min = v_a_min.min(r.v_a);
            }
            let period = records[end].t - records[start].t;
            CycleReport {
                cycle_index: k,
                period,
                w_out,
                w_in,
                p_bar_cycle: (w_out + w_in) / period,
                f_peak,
                v_a_min,
            }
        })
        .collect())
}
