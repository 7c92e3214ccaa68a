//! Cycle-power optimization on the reduced dynamics.
//!
//! The figure-eight is approximated by a circular orbit whose only trace
//! in the equations is the heading magnitude `psi`, so the state is just
//! `(theta, l)`. A cycle is one reel-out and one reel-in segment between
//! `l_min` and `l_max`; the optimizer shapes `psi(t)` and `l_dot(t)` for
//! maximal average power.

mod fit;
mod io;
mod search;

pub use fit::{fit_winch_law, fit_winch_law_samples, select_transfer_branch, WinchLawFit};
pub use io::{read_cycle_csv, write_cycle_csv, OptimizerSummary, CYCLE_COLUMNS};
pub use search::{optimize_cycle, seed_decision, DecisionVector};

use serde::{Deserialize, Serialize};

use crate::error::{check, KiteError, Result};
use crate::model::{KiteParams, WindCondition, THETA_GUARD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConstraints {
    pub l_min: f64,
    pub l_max: f64,
    pub psi_max: f64,
    /// Bounds on `l_dot / v_w`.
    pub alpha_limit_in: f64,
    pub alpha_limit_out: f64,
    /// Tolerance on `theta(T) - theta(0)` (rad).
    pub theta_periodicity_tol: f64,
}

impl Default for OptimizerConstraints {
    fn default() -> Self {
        Self {
            l_min: 130.0,
            l_max: 270.0,
            psi_max: 1.4,
            alpha_limit_in: -0.5,
            alpha_limit_out: 0.3,
            theta_periodicity_tol: 1e-9,
        }
    }
}

impl OptimizerConstraints {
    pub fn validate(&self) -> Result<()> {
        check(self.l_min > 0.0, "l_min", "must be > 0")?;
        check(self.l_min < self.l_max, "l_min", "must be below l_max")?;
        check(self.psi_max > 0.0, "psi_max", "must be > 0")?;
        check(
            self.alpha_limit_in < 0.0 && self.alpha_limit_out > 0.0,
            "alpha_limit_in",
            "limits must straddle zero",
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub constraints: OptimizerConstraints,
    /// Control nodes per reel segment; a cycle has twice as many.
    pub nodes_per_phase: usize,
    /// RK4 steps per node interval.
    pub substeps: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient step falls below this.
    pub tolerance: f64,
    /// Central-difference step for the gradient.
    pub fd_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            constraints: OptimizerConstraints::default(),
            nodes_per_phase: 20,
            substeps: 8,
            max_iterations: 3000,
            tolerance: 1e-7,
            fd_step: 1e-6,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.constraints.validate()?;
        check(self.nodes_per_phase >= 3, "nodes_per_phase", "must be >= 3")?;
        check(self.substeps >= 1, "substeps", "must be >= 1")?;
        check(self.tolerance > 0.0, "tolerance", "must be > 0")?;
        check(self.fd_step > 0.0, "fd_step", "must be > 0")
    }
}

/// Piecewise-linear controls on `2M` nodes. Nodes `0..=M` span the reel-out
/// segment `[0, t_out]`, nodes `M..2M` the reel-in segment; node `2M` is
/// node 0 again. `l_dot` is zero at nodes 0 and `M`, which fixes exactly
/// two sign changes per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDecision {
    pub psi_nodes: Vec<f64>,
    /// Tether speed at the nodes (m/s).
    pub l_dot_nodes: Vec<f64>,
    pub t_out: f64,
    pub t_in: f64,
}

impl CycleDecision {
    pub fn node_count(&self) -> usize {
        self.psi_nodes.len()
    }

    pub fn nodes_per_phase(&self) -> usize {
        self.node_count() / 2
    }

    pub fn duration(&self) -> f64 {
        self.t_out + self.t_in
    }

    /// Node times including the closing node at `T`.
    pub fn node_times(&self) -> Vec<f64> {
        let m = self.nodes_per_phase();
        let h_out = self.t_out / m as f64;
        let h_in = self.t_in / m as f64;
        (0..=2 * m)
            .map(|i| {
                if i <= m {
                    i as f64 * h_out
                } else {
                    self.t_out + (i - m) as f64 * h_in
                }
            })
            .collect()
    }

    /// Build a decision from interior reel-out and reel-in speeds scaled by
    /// `v_w`. Segment durations follow from covering `l_max - l_min`.
    pub fn from_normalized(
        reel_out: &[f64],
        reel_in: &[f64],
        psi: &[f64],
        constraints: &OptimizerConstraints,
        v_w: f64,
    ) -> Result<Self> {
        let m = reel_out.len() + 1;
        check(
            reel_in.len() + 1 == m,
            "reel_in",
            "must match reel_out length",
        )?;
        check(psi.len() == 2 * m, "psi", "needs one value per node")?;
        let sum_out: f64 = reel_out.iter().sum();
        let sum_in: f64 = reel_in.iter().sum();
        check(
            sum_out > 0.0 && sum_in < 0.0,
            "l_dot_nodes",
            "reel-out must be positive and reel-in negative on average",
        )?;
        let range = constraints.l_max - constraints.l_min;
        let t_out = m as f64 * range / (v_w * sum_out);
        let t_in = m as f64 * range / (v_w * -sum_in);

        let mut l_dot_nodes = Vec::with_capacity(2 * m);
        l_dot_nodes.push(0.0);
        l_dot_nodes.extend(reel_out.iter().map(|x| x * v_w));
        l_dot_nodes.push(0.0);
        l_dot_nodes.extend(reel_in.iter().map(|x| x * v_w));
        Ok(Self {
            psi_nodes: psi.to_vec(),
            l_dot_nodes,
            t_out,
            t_in,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.node_count();
        check(
            n >= 6 && n.is_multiple_of(2),
            "psi_nodes",
            "needs an even count >= 6",
        )?;
        check(
            self.l_dot_nodes.len() == n,
            "l_dot_nodes",
            "must match psi_nodes",
        )?;
        check(
            self.t_out > 0.0 && self.t_in > 0.0,
            "t_out",
            "durations must be > 0",
        )
    }

    /// Controls `(psi, l_dot)` at time `t` within node interval `i`.
    fn controls(&self, i: usize, s: f64) -> (f64, f64) {
        let n = self.node_count();
        let j = (i + 1) % n;
        let psi = self.psi_nodes[i] + s * (self.psi_nodes[j] - self.psi_nodes[i]);
        let l_dot = self.l_dot_nodes[i] + s * (self.l_dot_nodes[j] - self.l_dot_nodes[i]);
        (psi, l_dot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CycleSample {
    pub t: f64,
    pub theta: f64,
    pub l: f64,
    pub psi: f64,
    pub l_dot: f64,
    pub v_a: f64,
    #[serde(rename = "F")]
    pub force: f64,
    #[serde(rename = "P")]
    pub power: f64,
}

/// Residuals of the periodicity and range conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub theta: f64,
    pub l: f64,
    /// Largest miss of `l_min` or `l_max` by the extremes of `l(t)`.
    pub range: f64,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.theta.abs().max(self.l.abs()).max(self.range.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalCycle {
    pub samples: Vec<CycleSample>,
    pub decision: CycleDecision,
    pub v_w: f64,
    pub p_bar: f64,
    pub ratio: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub converged: bool,
}

/// Loyd's crosswind limit `(rho C_R A / 2) (4 E^2 / 27) v_w^3`.
pub fn loyd_limit(wind: &WindCondition, params: &KiteParams) -> f64 {
    let e = params.glide_ratio;
    params.force_factor() * 4.0 * e * e / 27.0 * wind.v_w.powi(3)
}

/// Trapezoidal mean of `F l_dot` over the samples, which must span one period.
pub fn average_power(samples: &[CycleSample], params: &KiteParams) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let integrand = |s: &CycleSample| s.l_dot * s.v_a * s.v_a;
    let energy: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (integrand(&w[0]) + integrand(&w[1])) * (w[1].t - w[0].t))
        .sum();
    let period = samples[samples.len() - 1].t - samples[0].t;
    if period <= 0.0 {
        return 0.0;
    }
    params.force_factor() * energy / period
}

/// Reduced-model air path speed; clamped at zero so the force never grows
/// again once the kite is overtaken by the tether.
fn reduced_air_speed(theta: f64, l_dot: f64, wind: &WindCondition, params: &KiteParams) -> f64 {
    (params.glide_ratio * (wind.v_w * theta.cos() - l_dot)).max(0.0)
}

/// `theta_dot` and its derivative with respect to `theta`.
fn theta_rate(
    theta: f64,
    l: f64,
    psi: f64,
    l_dot: f64,
    wind: &WindCondition,
    e: f64,
) -> (f64, f64) {
    let (st, ct) = theta.sin_cos();
    let cp = psi.cos();
    let rate = wind.v_w / l * (e * ct * cp - st) - l_dot / l * e * cp;
    let partial = wind.v_w / l * (-e * st * cp - ct);
    (rate, partial)
}

struct Pass {
    theta_end: f64,
    sensitivity: f64,
    l_end: f64,
    l_lo: f64,
    l_hi: f64,
    /// Trapezoidal integral of `l_dot v_a^2` over the samples.
    energy: f64,
    samples: Vec<CycleSample>,
}

fn integrate(
    decision: &CycleDecision,
    theta0: f64,
    l0: f64,
    substeps: usize,
    wind: &WindCondition,
    params: &KiteParams,
    record: bool,
) -> Result<Pass> {
    let e = params.glide_ratio;
    let times = decision.node_times();
    let mut theta = theta0;
    let mut sens = 1.0;
    let mut l = l0;
    let (mut l_lo, mut l_hi) = (l0, l0);
    let mut samples = Vec::new();
    let mut energy = 0.0;
    let mut prev_integrand = None;

    let sample = |t: f64, theta: f64, l: f64, psi: f64, l_dot: f64| {
        let v_a = reduced_air_speed(theta, l_dot, wind, params);
        let force = params.force_factor() * v_a * v_a;
        CycleSample {
            t,
            theta,
            l,
            psi,
            l_dot,
            v_a,
            force,
            power: force * l_dot,
        }
    };

    for i in 0..decision.node_count() {
        let h_node = times[i + 1] - times[i];
        let h = h_node / substeps as f64;
        for k in 0..substeps {
            let s0 = k as f64 / substeps as f64;
            let ds = 1.0 / substeps as f64;
            let (psi_a, ld_a) = decision.controls(i, s0);
            let (psi_m, ld_m) = decision.controls(i, s0 + 0.5 * ds);
            let (psi_b, ld_b) = decision.controls(i, s0 + ds);
            let here = sample(times[i] + s0 * h_node, theta, l, psi_a, ld_a);
            let integrand = here.l_dot * here.v_a * here.v_a;
            if let Some(prev) = prev_integrand {
                energy += 0.5 * (prev + integrand) * h;
            }
            prev_integrand = Some(integrand);
            if record {
                samples.push(here);
            }

            let f = |th: f64, ll: f64, psi: f64, ld: f64| theta_rate(th, ll, psi, ld, wind, e);
            let (k1, j1) = f(theta, l, psi_a, ld_a);
            let l_m = l + 0.5 * h * 0.5 * (ld_a + ld_m);
            let (k2, j2) = f(theta + 0.5 * h * k1, l_m, psi_m, ld_m);
            let (k3, j3) = f(theta + 0.5 * h * k2, l_m, psi_m, ld_m);
            let l_b = l + h * (ld_a + 4.0 * ld_m + ld_b) / 6.0;
            let (k4, j4) = f(theta + h * k3, l_b, psi_b, ld_b);

            // sensitivity of theta to theta(0), same RK4 stages
            let m1 = j1 * sens;
            let m2 = j2 * (sens + 0.5 * h * m1);
            let m3 = j3 * (sens + 0.5 * h * m2);
            let m4 = j4 * (sens + h * m3);

            theta += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            sens += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
            l = l_b;
            l_lo = l_lo.min(l);
            l_hi = l_hi.max(l);
            if !(theta.sin() > THETA_GUARD && theta > 0.0 && theta < std::f64::consts::PI) {
                return Err(KiteError::DegenerateGeometry { theta });
            }
            if l <= 0.0 {
                return Err(KiteError::InvalidParameter {
                    name: "l",
                    reason: "tether length reached zero".into(),
                });
            }
        }
    }
    let (psi, ld) = decision.controls(0, 0.0);
    let last = sample(*times.last().unwrap_or(&0.0), theta, l, psi, ld);
    if let Some(prev) = prev_integrand {
        let h = times[times.len() - 1] - times[times.len() - 2];
        energy += 0.5 * (prev + last.l_dot * last.v_a * last.v_a) * h / substeps as f64;
    }
    if record {
        samples.push(last);
    }
    Ok(Pass {
        theta_end: theta,
        sensitivity: sens,
        l_end: l,
        l_lo,
        l_hi,
        energy,
        samples,
    })
}

/// Periodic initial elevation by Newton's method on `theta(T) - theta(0)`.
fn periodic_theta(
    decision: &CycleDecision,
    cfg: &OptimizerConfig,
    wind: &WindCondition,
    params: &KiteParams,
    guess: f64,
) -> Result<(f64, f64, f64)> {
    let l0 = cfg.constraints.l_min;
    let mut theta0 = guess;
    let mut residual = f64::INFINITY;
    let mut energy = f64::NAN;
    for _ in 0..40 {
        let pass = integrate(decision, theta0, l0, cfg.substeps, wind, params, false)?;
        residual = pass.theta_end - theta0;
        energy = pass.energy;
        if residual.abs() < 1e-13 {
            break;
        }
        let slope = pass.sensitivity - 1.0;
        let step = if slope.abs() > 1e-12 {
            -residual / slope
        } else {
            residual
        };
        theta0 = (theta0 + step.clamp(-0.3, 0.3)).clamp(0.02, std::f64::consts::PI - 0.02);
    }
    Ok((theta0, residual, energy))
}

/// Integrate the reduced dynamics over one cycle from the periodic initial
/// elevation. Infeasibility shows up in the residuals rather than as an
/// error.
pub fn simulate_reduced_cycle(
    decision: &CycleDecision,
    cfg: &OptimizerConfig,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<OptimalCycle> {
    decision.validate()?;
    simulate_from(decision, cfg, wind, params, 1.0)
}

fn simulate_from(
    decision: &CycleDecision,
    cfg: &OptimizerConfig,
    wind: &WindCondition,
    params: &KiteParams,
    guess: f64,
) -> Result<OptimalCycle> {
    let (theta0, theta_res, _) = periodic_theta(decision, cfg, wind, params, guess)?;
    let c = &cfg.constraints;
    let pass = integrate(decision, theta0, c.l_min, cfg.substeps, wind, params, true)?;
    let p_bar = average_power(&pass.samples, params);
    let range = (pass.l_lo - c.l_min).abs().max((pass.l_hi - c.l_max).abs());
    Ok(OptimalCycle {
        samples: pass.samples,
        decision: decision.clone(),
        v_w: wind.v_w,
        p_bar,
        ratio: p_bar / loyd_limit(wind, params),
        residuals: Residuals {
            theta: theta_res,
            l: pass.l_end - c.l_min,
            range,
        },
        iterations: 0,
        converged: false,
    })
}

/// Normalized average power `P / P_Loyd` and periodic `theta(0)`, without
/// storing the trajectory.
pub(crate) fn evaluate(
    decision: &CycleDecision,
    cfg: &OptimizerConfig,
    wind: &WindCondition,
    params: &KiteParams,
    guess: f64,
) -> Result<(f64, f64)> {
    let (theta0, residual, energy) = periodic_theta(decision, cfg, wind, params, guess)?;
    if residual.abs() > cfg.constraints.theta_periodicity_tol {
        return Err(KiteError::NotPeriodic { residual });
    }
    let p_bar = params.force_factor() * energy / decision.duration();
    Ok((p_bar / loyd_limit(wind, params), theta0))
}
