use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{KiteError, Result};
use crate::guidance::CyclePhase;
use crate::model::wrap_angle;
use crate::numfmt::sig9;

pub const TELEMETRY_COLUMNS: [&str; 15] = [
    "t",
    "phi",
    "theta",
    "psi",
    "l",
    "delta",
    "v_winch_cmd",
    "v_winch_actual",
    "v_a",
    "gamma_s",
    "psi_s",
    "psi_c",
    "phase",
    "F",
    "P_mech",
];

/// One simulation sample. Angles are kept unwrapped in memory and wrapped
/// to `(-pi, pi]` when written.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub l: f64,
    pub delta: f64,
    pub v_winch_cmd: f64,
    pub v_winch_actual: f64,
    pub v_a: f64,
    pub gamma_s: f64,
    pub psi_s: f64,
    pub psi_c: f64,
    pub phase: CyclePhase,
    pub force: f64,
    pub p_mech: f64,
}

impl TelemetryRecord {
    fn fields(&self) -> [String; 15] {
        [
            sig9(self.t),
            sig9(self.phi),
            sig9(self.theta),
            sig9(wrap_angle(self.psi)),
            sig9(self.l),
            sig9(self.delta),
            sig9(self.v_winch_cmd),
            sig9(self.v_winch_actual),
            sig9(self.v_a),
            sig9(wrap_angle(self.gamma_s)),
            sig9(wrap_angle(self.psi_s)),
            sig9(wrap_angle(self.psi_c)),
            self.phase.label().to_string(),
            sig9(self.force),
            sig9(self.p_mech),
        ]
    }
}

/// Row as read back from a telemetry file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub t: f64,
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub l: f64,
    pub delta: f64,
    pub v_winch_cmd: f64,
    pub v_winch_actual: f64,
    pub v_a: f64,
    pub gamma_s: f64,
    pub psi_s: f64,
    pub psi_c: f64,
    pub phase: String,
    #[serde(rename = "F")]
    pub force: f64,
    #[serde(rename = "P_mech")]
    pub p_mech: f64,
}

impl TelemetryRow {
    pub fn cycle_phase(&self) -> Result<CyclePhase> {
        CyclePhase::from_label(&self.phase)
            .ok_or_else(|| KiteError::Config(format!("unknown phase `{}`", self.phase)))
    }
}

/// CSV writer that flushes whenever simulated time enters a new second.
pub struct TelemetryWriter<W: Write> {
    inner: csv::Writer<W>,
    last_second: Option<i64>,
}

impl<W: Write> TelemetryWriter<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TELEMETRY_COLUMNS)?;
        inner.flush()?;
        Ok(Self {
            inner,
            last_second: None,
        })
    }

    pub fn write(&mut self, rec: &TelemetryRecord) -> Result<()> {
        self.inner.write_record(rec.fields())?;
        let second = rec.t.floor() as i64;
        if self.last_second.is_some_and(|s| s != second) {
            self.inner.flush()?;
        }
        self.last_second = Some(second);
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_telemetry<R: Read>(input: R) -> Result<Vec<TelemetryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if !headers.iter().eq(TELEMETRY_COLUMNS.iter().copied()) {
        return Err(KiteError::Config(format!(
            "telemetry header mismatch: expected {}",
            TELEMETRY_COLUMNS.join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(KiteError::from))
        .collect()
}
