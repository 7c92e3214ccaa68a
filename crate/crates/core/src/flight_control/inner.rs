//! Turn-rate controller: feedforward from the turn-rate law plus a PI
//! feedback on the limited, low-passed error. Both paths are scaled by
//! `1/K` so the loop sees a plant with unit gain.

use serde::{Deserialize, Serialize};

use super::actuator::{ActuatorModel, LowPass};
use super::k_psidot;
use crate::error::Result;
use crate::model::KiteParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerLoopConfig {
    pub kp: f64,
    pub ki: f64,
    /// Error low-pass time constant (s).
    pub tau: f64,
    /// Error limiter bound (rad/s).
    pub error_limit: f64,
    /// Feed the gravity term T1 into the feedforward.
    pub gravity_compensation: bool,
}

impl Default for InnerLoopConfig {
    fn default() -> Self {
        Self {
            kp: 0.5,
            ki: 0.2,
            tau: 0.1,
            error_limit: 0.5,
            gravity_compensation: false,
        }
    }
}

/// Angles of the gravity term in the extended turn-rate law. They live in
/// a body-related frame, so callers supply them as they are.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GravityAttitude {
    pub theta_g: f64,
    pub psi_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InnerLoopOutput {
    /// Deflection sent to the pod.
    pub delta: f64,
    pub delta_ff: f64,
    pub delta_fb: f64,
}

#[derive(Debug, Clone)]
pub struct InnerLoop {
    cfg: InnerLoopConfig,
    ff_shaper: ActuatorModel,
    pod: ActuatorModel,
    filter: LowPass,
    integral: f64,
    last: InnerLoopOutput,
}

impl InnerLoop {
    pub fn new(cfg: InnerLoopConfig, params: &KiteParams) -> Self {
        Self {
            cfg,
            ff_shaper: ActuatorModel::new(params.max_deflection, params.max_deflection_rate),
            pod: ActuatorModel::new(params.max_deflection, params.max_deflection_rate),
            filter: LowPass::new(cfg.tau),
            integral: 0.0,
            last: InnerLoopOutput::default(),
        }
    }

    pub fn config(&self) -> &InnerLoopConfig {
        &self.cfg
    }

    pub fn last_output(&self) -> InnerLoopOutput {
        self.last
    }

    /// Gravity feedforward `T1 = (M/K) cos(theta_g) sin(psi_g) / v_a`.
    pub fn gravity_feedforward(
        k: f64,
        v_a: f64,
        gravity: &GravityAttitude,
        params: &KiteParams,
    ) -> f64 {
        params.gravity_turn / k * gravity.theta_g.cos() * gravity.psi_g.sin() / v_a
    }

    /// Advance one sample. On a low air path speed the previous deflection
    /// is kept and the error is returned to the caller.
    pub fn step(
        &mut self,
        psi_dot_s_prime: f64,
        psi_dot_m_prime: f64,
        v_a: f64,
        gravity: Option<&GravityAttitude>,
        params: &KiteParams,
        dt: f64,
    ) -> Result<InnerLoopOutput> {
        let k = k_psidot(v_a, params)?;

        let t1 = match gravity {
            Some(g) if self.cfg.gravity_compensation => {
                Self::gravity_feedforward(k, v_a, g, params)
            }
            _ => 0.0,
        };
        let delta_ff = self.ff_shaper.step(psi_dot_s_prime / k - t1, dt);

        let limit = self.cfg.error_limit;
        let error = self
            .filter
            .step((psi_dot_s_prime - psi_dot_m_prime).clamp(-limit, limit), dt);

        // Conditional integration: freeze the integrator while the pod is
        // saturated in the direction the error pushes.
        let candidate = self.integral + error * dt;
        let trial = delta_ff + (self.cfg.kp * error + self.cfg.ki * candidate) / k;
        if !(self.pod.saturates(trial) && trial.signum() == error.signum()) {
            self.integral = candidate;
        }
        let delta_fb = (self.cfg.kp * error + self.cfg.ki * self.integral) / k;

        let delta = self.pod.step(delta_ff + delta_fb, dt);
        self.last = InnerLoopOutput {
            delta,
            delta_ff,
            delta_fb,
        };
        Ok(self.last)
    }

    /// Hold the last deflection, e.g. after a low-airspeed error.
    pub fn hold(&mut self, dt: f64) -> f64 {
        let d = self.pod.deflection();
        self.pod.step(d, dt)
    }
}
