//! Heading controller.
//!
//! The feedforward runs an internal copy of the plant `psi_c' = K delta +
//! psi_dot_ct*` driven through the actuator limits by the braking-parabola
//! law, so a step in `psi_s` becomes the fastest curve the pod can fly.
//! A proportional feedback on the limited, low-passed `psi_c - psi_m`
//! corrects the rest.

use serde::{Deserialize, Serialize};

use super::actuator::{ActuatorModel, LowPass};
use super::{braking_deflection, k_psidot};
use crate::error::Result;
use crate::model::KiteParams;

/// Choice of `psi_dot_ct*` in the internal loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstermMode {
    /// Constant or stepped set-points: `psi_dot_ct* = psi_dot_ct`.
    StepInput,
    /// Set-points from target points: `psi_dot_ct* = 0`.
    TargetPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterLoopConfig {
    /// Proportional gain (1/s).
    pub kp: f64,
    /// Error low-pass time constant (s).
    pub tau: f64,
    /// Error limiter bound (rad).
    pub error_limit: f64,
    pub mode: CrosstermMode,
    /// Time constant of the linear zone replacing the parabola near zero
    /// error, where its infinite slope would chatter at a finite sample
    /// rate (s). Zero disables it.
    pub linear_zone_tau: f64,
}

impl Default for OuterLoopConfig {
    fn default() -> Self {
        Self {
            kp: 0.8,
            tau: 0.2,
            error_limit: 0.3,
            mode: CrosstermMode::StepInput,
            linear_zone_tau: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OuterLoopOutput {
    /// Inertial turn-rate set-point for the inner loop (rad/s).
    pub psi_dot_s_prime: f64,
    /// Shaped reference heading at this sample (rad).
    pub psi_c: f64,
    /// Feedforward deflection of the internal loop.
    pub delta_ff: f64,
    /// Feedback part of the rate command (rad/s).
    pub feedback: f64,
}

#[derive(Debug, Clone)]
pub struct OuterLoop {
    cfg: OuterLoopConfig,
    shaper: ActuatorModel,
    filter: LowPass,
    psi_c: Option<f64>,
}

impl OuterLoop {
    pub fn new(cfg: OuterLoopConfig, params: &KiteParams) -> Self {
        Self {
            cfg,
            shaper: ActuatorModel::new(params.max_deflection, params.max_deflection_rate),
            filter: LowPass::new(cfg.tau),
            psi_c: None,
        }
    }

    pub fn config(&self) -> &OuterLoopConfig {
        &self.cfg
    }

    pub fn psi_c(&self) -> Option<f64> {
        self.psi_c
    }

    /// Set the internal reference, e.g. to the measured heading at start.
    pub fn reset(&mut self, psi_c: f64) {
        self.psi_c = Some(psi_c);
        self.shaper.reset(0.0);
        self.filter.reset(0.0);
    }

    fn shaping_deflection(&self, error: f64, psi_dot_ct_star: f64, psi_dot_s: f64, k: f64) -> f64 {
        let rate = self.shaper.max_rate;
        let tau = self.cfg.linear_zone_tau;
        // Below x_lin the parabola is replaced by the chord through the
        // origin, a first-order lag with time constant tau.
        let x_lin = 2.0 * rate * k * tau * tau;
        if tau > 0.0 && error.abs() < x_lin {
            let slope = (2.0 * rate / (k * x_lin)).sqrt();
            slope * error - (psi_dot_ct_star - psi_dot_s) / k
        } else {
            braking_deflection(error, psi_dot_ct_star, psi_dot_s, rate, k)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        psi_s: f64,
        psi_m: f64,
        psi_dot_ct: f64,
        psi_dot_s: f64,
        v_a: f64,
        params: &KiteParams,
        dt: f64,
    ) -> Result<OuterLoopOutput> {
        let k = k_psidot(v_a, params)?;
        let psi_c = *self.psi_c.get_or_insert(psi_m);
        let ct_star = match self.cfg.mode {
            CrosstermMode::StepInput => psi_dot_ct,
            CrosstermMode::TargetPoint => 0.0,
        };

        let delta_i = self.shaping_deflection(psi_s - psi_c, ct_star, psi_dot_s, k);
        let delta_ff = self.shaper.step(delta_i, dt);
        let psi_dot_c = k * delta_ff + ct_star;

        let limit = self.cfg.error_limit;
        let error = self.filter.step((psi_c - psi_m).clamp(-limit, limit), dt);
        let feedback = self.cfg.kp * error;

        self.psi_c = Some(psi_c + psi_dot_c * dt);

        Ok(OuterLoopOutput {
            // plant: psi_dot = psi_dot' + psi_dot_ct
            psi_dot_s_prime: psi_dot_c - psi_dot_ct + feedback,
            psi_c,
            delta_ff,
            feedback,
        })
    }
}
