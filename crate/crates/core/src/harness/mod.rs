//! Configuration, closed-loop simulation, telemetry and energy accounting.

mod config;
mod energy;
mod sim;
mod telemetry;

pub use config::{
    InitialConfig, OutputConfig, PhaseName, SensorConfig, SimConfig, SimSettings, WindConfig,
    WindSource,
};
pub use energy::{cycle_boundaries, energy_accounting, CycleReport};
pub use sim::{
    run_batch, run_simulation, run_simulation_with, ControlTrace, Measurement, SimRun, Simulation,
};
pub use telemetry::{
    read_telemetry, TelemetryRecord, TelemetryRow, TelemetryWriter, TELEMETRY_COLUMNS,
};

use std::io::Write;

use crate::error::Result;
use crate::numfmt::sig9;

/// Round to the nine significant digits used in every output file.
pub fn round9(x: f64) -> f64 {
    sig9(x).parse().unwrap_or(x)
}

pub fn write_report<W: Write>(mut out: W, reports: &[CycleReport]) -> Result<()> {
    let rounded: Vec<CycleReport> = reports
        .iter()
        .map(|r| CycleReport {
            cycle_index: r.cycle_index,
            period: round9(r.period),
            w_out: round9(r.w_out),
            w_in: round9(r.w_in),
            p_bar_cycle: round9(r.p_bar_cycle),
            f_peak: round9(r.f_peak),
            v_a_min: round9(r.v_a_min),
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &rounded)
        .map_err(|e| crate::error::KiteError::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}
