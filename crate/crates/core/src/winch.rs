//! Winch set-value laws for each cycle phase and the winch drive model.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{check, Result};
use crate::flight_control::LowPass;
use crate::model::KiteParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WinchConfig {
    /// Power-phase reel-out factor; the loop settles at `v_w' cos(theta) / a`.
    pub a: f64,
    /// Pivot of the transfer/return law (rad).
    pub theta0: f64,
    /// Slope below the pivot.
    pub a_lower: f64,
    /// Slope above the pivot.
    pub a_upper: f64,
    /// Normalized reel-in limit, `l_dot / v_w`.
    pub alpha_limit_in: f64,
    /// Normalized reel-out limit.
    pub alpha_limit_out: f64,
    /// Restart air path speed floor as a multiple of `v_w`.
    pub v_min_restart_factor: f64,
    pub l_dot_max: f64,
    pub l_ddot_max: f64,
    /// Command delay (s).
    pub tau: f64,
    /// Drive low-pass time constant (s).
    pub lowpass_tau: f64,
    /// Tether force limit (N).
    pub f_max: f64,
    /// Extra reel-out speed per newton above `f_max` ((m/s)/N).
    pub force_gain: f64,
}

impl Default for WinchConfig {
    fn default() -> Self {
        Self {
            a: 3.5,
            theta0: 1.05,
            a_lower: -0.55,
            a_upper: -0.65,
            alpha_limit_in: -0.5,
            alpha_limit_out: 0.3,
            v_min_restart_factor: 1.5,
            l_dot_max: 6.0,
            l_ddot_max: 3.0,
            tau: 0.1,
            lowpass_tau: 0.2,
            f_max: 25_000.0,
            force_gain: 0.0024,
        }
    }
}

impl WinchConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.a > 1.0, "a", "must be > 1")?;
        check(
            self.alpha_limit_in < 0.0 && self.alpha_limit_out > 0.0,
            "alpha_limit_in",
            "limits must straddle zero",
        )?;
        check(self.l_dot_max > 0.0, "l_dot_max", "must be > 0")?;
        check(self.l_ddot_max > 0.0, "l_ddot_max", "must be > 0")?;
        check(self.tau >= 0.0, "tau", "must be >= 0")?;
        check(self.lowpass_tau >= 0.0, "lowpass_tau", "must be >= 0")?;
        check(self.f_max > 0.0, "f_max", "must be > 0")?;
        check(self.force_gain >= 0.0, "force_gain", "must be >= 0")
    }

    pub fn v_min_restart(&self, v_w: f64) -> f64 {
        self.v_min_restart_factor * v_w
    }
}

/// Reel-out speed set-value of the power phase, `v_a / ((a - 1) E)`.
pub fn power_phase_speed(v_a: f64, cfg: &WinchConfig, params: &KiteParams) -> f64 {
    v_a / ((cfg.a - 1.0) * params.glide_ratio)
}

/// Saturated two-slope law of the transfer and return phases.
pub fn transfer_return_speed(theta_m: f64, v_w: f64, cfg: &WinchConfig) -> f64 {
    let x = theta_m - cfg.theta0;
    let slope = if x <= 0.0 { cfg.a_lower } else { cfg.a_upper };
    v_w * (slope * x).clamp(cfg.alpha_limit_in, cfg.alpha_limit_out)
}

/// Restart law: the transfer/return law, capped so that the air path
/// speed stays above the restart floor.
pub fn restart_speed(theta_m: f64, v_w: f64, cfg: &WinchConfig, params: &KiteParams) -> f64 {
    let bound = theta_m.cos() * v_w - cfg.v_min_restart(v_w) / params.glide_ratio;
    transfer_return_speed(theta_m, v_w, cfg).min(bound)
}

/// Raise the reel-out speed in proportion to the tether force above the
/// limit.
pub fn force_limit_override(force: f64, l_dot_cmd: f64, cfg: &WinchConfig) -> f64 {
    if force <= cfg.f_max {
        return l_dot_cmd;
    }
    let raised = l_dot_cmd + cfg.force_gain * (force - cfg.f_max);
    raised.min(cfg.l_dot_max).max(l_dot_cmd)
}

/// Winch drive: dead time, low-pass, acceleration limit, speed limit.
#[derive(Debug, Clone)]
pub struct WinchState {
    cfg: WinchConfig,
    queue: VecDeque<f64>,
    filter: LowPass,
    l_dot: f64,
}

impl WinchState {
    pub fn new(cfg: WinchConfig) -> Self {
        Self::with_speed(cfg, 0.0)
    }

    /// Start at steady speed `l_dot`, with the delay line filled with it.
    pub fn with_speed(cfg: WinchConfig, l_dot: f64) -> Self {
        let l_dot = l_dot.clamp(-cfg.l_dot_max, cfg.l_dot_max);
        let mut filter = LowPass::new(cfg.lowpass_tau);
        filter.reset(l_dot);
        Self {
            cfg,
            queue: VecDeque::new(),
            filter,
            l_dot,
        }
    }

    pub fn l_dot(&self) -> f64 {
        self.l_dot
    }

    pub fn config(&self) -> &WinchConfig {
        &self.cfg
    }

    fn delayed(&mut self, command: f64, dt: f64) -> f64 {
        let steps = (self.cfg.tau / dt).round() as usize;
        if steps == 0 {
            return command;
        }
        if self.queue.is_empty() {
            self.queue
                .extend(std::iter::repeat_n(self.filter.value(), steps));
        }
        self.queue.push_back(command);
        self.queue.pop_front().unwrap_or(command)
    }

    /// Advance the drive by one sample without force limiting.
    pub fn step(&mut self, command: f64, dt: f64) -> f64 {
        self.step_with_force(command, 0.0, dt)
    }

    /// Advance the drive by one sample. The force override acts on the
    /// drive's speed reference, so the acceleration and speed limits still
    /// hold exactly.
    pub fn step_with_force(&mut self, command: f64, force: f64, dt: f64) -> f64 {
        let delayed = self.delayed(command, dt);
        let reference = force_limit_override(force, self.filter.step(delayed, dt), &self.cfg);
        let max_change = self.cfg.l_ddot_max * dt;
        let next = self.l_dot + (reference - self.l_dot).clamp(-max_change, max_change);
        self.l_dot = next.clamp(-self.cfg.l_dot_max, self.cfg.l_dot_max);
        self.l_dot
    }
}
