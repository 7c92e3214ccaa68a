use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{CycleSample, OptimalCycle};
use crate::error::{KiteError, Result};
use crate::numfmt::sig9;

pub const CYCLE_COLUMNS: [&str; 8] = ["t", "theta", "l", "psi", "l_dot", "v_a", "F", "P"];

/// Summary record written next to the optimum trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSummary {
    #[serde(rename = "P_bar")]
    pub p_bar: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub v_w: f64,
    pub max_residual: f64,
}

impl OptimizerSummary {
    pub fn from_cycle(cycle: &OptimalCycle) -> Self {
        Self {
            p_bar: cycle.p_bar,
            ratio: cycle.ratio,
            iterations: cycle.iterations,
            converged: cycle.converged,
            v_w: cycle.v_w,
            max_residual: cycle.residuals.max_abs(),
        }
    }
}

pub fn write_cycle_csv<W: Write>(out: W, samples: &[CycleSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CYCLE_COLUMNS)?;
    for s in samples {
        w.write_record([s.t, s.theta, s.l, s.psi, s.l_dot, s.v_a, s.force, s.power].map(sig9))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cycle_csv<R: Read>(input: R) -> Result<Vec<CycleSample>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    for col in CYCLE_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(KiteError::Config(format!(
                "cycle CSV is missing column `{col}`"
            )));
        }
    }
    r.deserialize()
        .map(|row| row.map_err(KiteError::from))
        .collect()
}
