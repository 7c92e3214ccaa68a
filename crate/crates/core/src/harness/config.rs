use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{check, KiteError, Result};
use crate::flight_control::{InnerLoopConfig, OuterLoopConfig};
use crate::guidance::{CycleConfig, CyclePhase, TpId};
use crate::model::{KiteParams, KiteState, WindCondition};
use crate::optimizer::OptimizerConfig;
use crate::winch::WinchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            dt: 0.02,
            duration: 600.0,
            seed: 0,
        }
    }
}

/// Constant wind with optional piecewise-linear breakpoints `[t, v_w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindConfig {
    pub v_w: f64,
    #[serde(default)]
    pub gusts: Vec<[f64; 2]>,
}

impl WindConfig {
    pub fn constant(v_w: f64) -> Self {
        Self {
            v_w,
            gusts: Vec::new(),
        }
    }

    /// Wind speed at time `t`; held constant outside the breakpoints.
    pub fn at(&self, t: f64) -> f64 {
        let g = &self.gusts;
        match g.len() {
            0 => self.v_w,
            _ if t <= g[0][0] => g[0][1],
            _ if t >= g[g.len() - 1][0] => g[g.len() - 1][1],
            _ => {
                let i = g.partition_point(|b| b[0] <= t) - 1;
                let [t0, v0] = g[i];
                let [t1, v1] = g[i + 1];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn nominal(&self) -> WindCondition {
        WindCondition::new(self.v_w)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.v_w >= 0.0 && self.v_w.is_finite(),
            "v_w",
            "must be >= 0",
        )?;
        check(
            self.gusts.windows(2).all(|w| w[1][0] > w[0][0]),
            "gusts",
            "breakpoint times must increase",
        )?;
        check(
            self.gusts.iter().all(|b| b[1] >= 0.0),
            "gusts",
            "wind speeds must be >= 0",
        )
    }
}

/// Wind speed the winch laws are scaled with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindSource {
    /// Current simulated wind, as an anemometer at the kite would see it.
    #[default]
    Measured,
    /// The configured base wind, blind to gusts.
    Nominal,
}

/// Standard deviations of additive Gaussian sensor noise; all zero means
/// ideal sensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub l: f64,
    pub psi_dot: f64,
    pub v_a: f64,
    pub wind_source: WindSource,
}

impl SensorConfig {
    pub fn is_ideal(&self) -> bool {
        [
            self.phi,
            self.theta,
            self.psi,
            self.l,
            self.psi_dot,
            self.v_a,
        ]
        .iter()
        .all(|s| *s == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check(
            [
                self.phi,
                self.theta,
                self.psi,
                self.l,
                self.psi_dot,
                self.v_a,
            ]
            .iter()
            .all(|s| *s >= 0.0 && s.is_finite()),
            "sensors",
            "noise levels must be finite and >= 0",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub l: f64,
    pub l_dot: f64,
    pub phase: PhaseName,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            phi: 0.0,
            theta: 0.9,
            psi: -1.2,
            l: 130.0,
            l_dot: 0.0,
            phase: PhaseName::PowerTp1,
        }
    }
}

impl InitialConfig {
    pub fn state(&self) -> KiteState {
        KiteState::new(self.phi, self.theta, self.psi, self.l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    PowerTp1,
    PowerTp2,
    Transfer,
    Return,
    Restart,
}

impl From<PhaseName> for CyclePhase {
    fn from(p: PhaseName) -> Self {
        match p {
            PhaseName::PowerTp1 => CyclePhase::Power(TpId::Tp1),
            PhaseName::PowerTp2 => CyclePhase::Power(TpId::Tp2),
            PhaseName::Transfer => CyclePhase::Transfer,
            PhaseName::Return => CyclePhase::Return,
            PhaseName::Restart => CyclePhase::Restart,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub telemetry: String,
    pub report: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            telemetry: "telemetry.csv".into(),
            report: "cycles.json".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub sim: SimSettings,
    pub kite: KiteParams,
    pub wind: WindConfig,
    #[serde(default)]
    pub cycle: CycleConfig,
    #[serde(default)]
    pub winch: WinchConfig,
    #[serde(default)]
    pub inner: InnerLoopConfig,
    #[serde(default)]
    pub outer: OuterLoopConfig,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl SimConfig {
    /// Nominal configuration with the given wind speed.
    pub fn nominal(v_w: f64) -> Self {
        Self {
            sim: SimSettings::default(),
            kite: KiteParams::default(),
            wind: WindConfig::constant(v_w),
            cycle: CycleConfig::default(),
            winch: WinchConfig::default(),
            inner: InnerLoopConfig::default(),
            outer: OuterLoopConfig::default(),
            sensors: SensorConfig::default(),
            initial: InitialConfig::default(),
            optimizer: OptimizerConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| KiteError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KiteError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            KiteError::Config(msg) => KiteError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| KiteError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.sim.dt > 0.0 && self.sim.dt <= 0.1,
            "dt",
            "must be in (0, 0.1]",
        )?;
        check(self.sim.duration >= 0.0, "duration", "must be >= 0")?;
        self.kite.validate()?;
        self.wind.validate()?;
        self.cycle.validate()?;
        self.winch.validate()?;
        self.sensors.validate()?;
        self.optimizer.validate()?;
        self.initial.state().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[kite]
glide_ratio = 5.0
steering_gain = 0.05
area = 21.0
air_density = 1.2
force_coefficient = 1.0
min_air_speed = 5.0
max_deflection = 0.5
max_deflection_rate = 1.0

[wind]
v_w = 10.0
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = SimConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.wind.v_w, 10.0);
        assert_eq!(cfg.sim.dt, 0.02);
        assert_eq!(cfg.winch, WinchConfig::default());
    }

    #[test]
    fn missing_field_is_named() {
        let text = MINIMAL.replace("area = 21.0\n", "");
        let err = SimConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("area"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = format!("{MINIMAL}\n[winch]\nspeed = 3\n");
        let err = SimConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("speed"), "{err}");
    }

    #[test]
    fn dt_range_is_checked() {
        let text = format!("{MINIMAL}\n[sim]\ndt = 0.5\n");
        assert!(SimConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = SimConfig::nominal(10.0);
        let back = SimConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn gust_profile_interpolates() {
        let w = WindConfig {
            v_w: 10.0,
            gusts: vec![[10.0, 10.0], [20.0, 15.0], [30.0, 10.0]],
        };
        assert_eq!(w.at(0.0), 10.0);
        assert_eq!(w.at(15.0), 12.5);
        assert_eq!(w.at(20.0), 15.0);
        assert_eq!(w.at(100.0), 10.0);
        assert_eq!(WindConfig::constant(7.0).at(3.0), 7.0);
    }
}
