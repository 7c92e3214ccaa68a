//! Four-state kite dynamics on the tether sphere.
//!
//! The kite is described by `x = [phi, theta, psi, l]`: azimuth around the
//! wind axis, angle from the wind axis, orientation w.r.t. the wind and the
//! tether length. Forces are assumed to be in quasi-static equilibrium, so
//! the system is first order. Everything here is a pure function.

use serde::{Deserialize, Serialize};

use crate::error::{check, KiteError, Result};

/// Guard band around `theta in {0, pi}` where the equations are singular.
pub const THETA_GUARD: f64 = 1e-6;

/// Denominator tolerance for the `gamma <-> psi` conversions.
pub const AIRFLOW_TOL: f64 = 1e-9;

/// Below this angular speed the flight direction is considered undefined.
pub const DIRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KiteState {
    /// Azimuth around the wind axis (rad).
    pub phi: f64,
    /// Angle between tether and wind axis (rad).
    pub theta: f64,
    /// Orientation w.r.t. the wind, 0 = heading against the wind (rad).
    pub psi: f64,
    /// Tether length (m).
    pub l: f64,
}

impl KiteState {
    pub fn new(phi: f64, theta: f64, psi: f64, l: f64) -> Self {
        Self { phi, theta, psi, l }
    }

    pub fn validate(&self) -> Result<()> {
        check(self.l > 0.0, "l", "tether length must be positive")?;
        guard_theta(self.theta)
    }
}

/// Plant input `u = [delta, v_winch]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Steering deflection (actuator units).
    pub delta: f64,
    /// Tether speed, positive when reeling out (m/s).
    pub v_winch: f64,
}

impl ControlInput {
    pub fn new(delta: f64, v_winch: f64) -> Self {
        Self { delta, v_winch }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KiteParams {
    /// Glide ratio E.
    pub glide_ratio: f64,
    /// Steering gain g_k of the turn-rate law (rad/m per unit deflection).
    pub steering_gain: f64,
    /// Projected kite area (m^2).
    pub area: f64,
    /// Air density (kg/m^3).
    pub air_density: f64,
    /// Tether force coefficient C_R.
    pub force_coefficient: f64,
    /// Weight-dependent turn-rate parameter M; only used by the gravity
    /// feedforward of the inner loop.
    #[serde(default)]
    pub gravity_turn: f64,
    /// Minimum air path speed for stable flight (m/s).
    pub min_air_speed: f64,
    /// Steering deflection limit delta_s.
    pub max_deflection: f64,
    /// Steering deflection rate limit (1/s).
    pub max_deflection_rate: f64,
}

impl Default for KiteParams {
    fn default() -> Self {
        Self {
            glide_ratio: 5.0,
            steering_gain: 0.05,
            area: 21.0,
            air_density: 1.2,
            force_coefficient: 1.0,
            gravity_turn: 0.0,
            min_air_speed: 5.0,
            max_deflection: 0.5,
            max_deflection_rate: 1.0,
        }
    }
}

impl KiteParams {
    pub fn validate(&self) -> Result<()> {
        check(self.glide_ratio > 0.0, "glide_ratio", "must be > 0")?;
        check(self.steering_gain > 0.0, "steering_gain", "must be > 0")?;
        check(self.area > 0.0, "area", "must be > 0")?;
        check(self.air_density > 0.0, "air_density", "must be > 0")?;
        check(
            self.force_coefficient > 0.0,
            "force_coefficient",
            "must be > 0",
        )?;
        check(self.min_air_speed >= 0.0, "min_air_speed", "must be >= 0")?;
        check(self.max_deflection > 0.0, "max_deflection", "must be > 0")?;
        check(
            self.max_deflection_rate > 0.0,
            "max_deflection_rate",
            "must be > 0",
        )
    }

    /// `rho * C_R * A / 2`, the factor between `v_a^2` and tether force.
    pub fn force_factor(&self) -> f64 {
        0.5 * self.air_density * self.force_coefficient * self.area
    }
}

/// Constant, homogeneous wind along +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindCondition {
    pub v_w: f64,
}

impl WindCondition {
    pub fn new(v_w: f64) -> Self {
        Self { v_w }
    }

    pub fn validate(&self) -> Result<()> {
        check(self.v_w > 0.0, "v_w", "wind speed must be > 0")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub phi_dot: f64,
    pub theta_dot: f64,
    pub psi_dot: f64,
    pub l_dot: f64,
}

fn guard_theta(theta: f64) -> Result<()> {
    if theta.sin() > THETA_GUARD && theta.is_finite() {
        Ok(())
    } else {
        Err(KiteError::DegenerateGeometry { theta })
    }
}

/// Cartesian kite position; x points downwind and z points down.
pub fn position(state: &KiteState) -> [f64; 3] {
    let (sp, cp) = state.phi.sin_cos();
    let (st, ct) = state.theta.sin_cos();
    [state.l * ct, state.l * sp * st, -state.l * cp * st]
}

/// Air path speed from the wind and the reeling speed.
pub fn air_path_speed(
    state: &KiteState,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> f64 {
    let e = params.glide_ratio;
    wind.v_w * e * state.theta.cos() - l_dot * e
}

/// Right-hand side of the equations of motion.
///
/// The wind-window motion uses the wind speed directly so it stays defined
/// through `theta = pi/2`. `v_a` enters only through the steering term,
/// which is how the measured air path speed is fed into the controller.
pub fn derivatives(
    state: &KiteState,
    input: &ControlInput,
    v_a: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<StateDerivative> {
    guard_theta(state.theta)?;
    check(state.l > 0.0, "l", "tether length must be positive")?;

    let e = params.glide_ratio;
    let l = state.l;
    let l_dot = input.v_winch;
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.psi.sin_cos();

    let theta_dot = wind.v_w / l * (e * ct * cp - st) - l_dot / l * e * cp;
    let phi_dot = -(wind.v_w * e * ct - l_dot * e) / (l * st) * sp;
    let psi_dot = params.steering_gain * v_a * input.delta + phi_dot * ct;

    Ok(StateDerivative {
        phi_dot,
        theta_dot,
        psi_dot,
        l_dot,
    })
}

/// Kinematic coupling `phi_dot * cos(theta)` written with the air path
/// speed, i.e. the part of `psi_dot` not produced by steering.
pub fn crossterm(state: &KiteState, v_a: f64) -> Result<f64> {
    guard_theta(state.theta)?;
    let (st, ct) = state.theta.sin_cos();
    Ok(-v_a * state.psi.sin() * ct / (state.l * st))
}

/// Direction of motion on the sphere, measured from the `+theta` meridian.
pub fn flight_direction_kinematic(phi_dot: f64, theta_dot: f64, theta: f64) -> Result<f64> {
    let east = -phi_dot * theta.sin();
    if east.abs() < DIRECTION_TOL && theta_dot.abs() < DIRECTION_TOL {
        return Err(KiteError::UndefinedDirection);
    }
    Ok(east.atan2(theta_dot))
}

/// Offset `c1` between heading and flight direction caused by the wind.
pub fn wind_offset(
    theta: f64,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<f64> {
    let denominator = wind.v_w * theta.cos() - l_dot;
    if denominator.abs() < AIRFLOW_TOL {
        return Err(KiteError::SingularAirflow { denominator });
    }
    Ok(wind.v_w * theta.sin() / (params.glide_ratio * denominator))
}

pub fn gamma_from_psi(
    psi: f64,
    theta: f64,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<f64> {
    let c1 = wind_offset(theta, l_dot, wind, params)?;
    let (sp, cp) = psi.sin_cos();
    Ok(sp.atan2(cp - c1))
}

/// Heading that produces the flight direction `gamma`.
pub fn psi_from_gamma(
    gamma: f64,
    theta: f64,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<f64> {
    let c1 = wind_offset(theta, l_dot, wind, params)?;
    psi_from_gamma_c1(gamma, c1)
}

pub(crate) fn psi_from_gamma_c1(gamma: f64, c1: f64) -> Result<f64> {
    let (sg, cg) = gamma.sin_cos();
    let disc = 1.0 - c1 * c1 * sg * sg;
    if disc < 0.0 {
        return Err(KiteError::NoSolution { gamma, c1 });
    }
    // larger root of r^2 + 2 r c1 cos(gamma) + c1^2 - 1 = 0; if it is not
    // positive the course points away from the whole heading circle
    let r = disc.sqrt() - c1 * cg;
    if r <= 0.0 {
        return Err(KiteError::NoSolution { gamma, c1 });
    }
    Ok((r * sg).atan2(c1 + r * cg))
}

/// Steady-state wind window angle for constant heading and winch speed.
pub fn equilibrium_theta(
    psi: f64,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<f64> {
    let e = params.glide_ratio;
    let cp = psi.cos();
    let argument = cp / (cp * cp + 1.0 / (e * e)).sqrt() * l_dot / wind.v_w;
    if !(-1.0..=1.0).contains(&argument) {
        return Err(KiteError::OutOfRange { argument });
    }
    Ok((e * cp).atan() - argument.asin())
}

/// Upper bound on `l_dot` that keeps `v_a` above `min_air_speed`.
pub fn min_winch_speed_bound(theta: f64, wind: &WindCondition, params: &KiteParams) -> f64 {
    -params.min_air_speed / params.glide_ratio + wind.v_w * theta.cos()
}

/// Tether force; negative air path speeds count as zero force.
pub fn tether_force(v_a: f64, params: &KiteParams) -> f64 {
    let v = v_a.max(0.0);
    params.force_factor() * v * v
}

/// True when the air path speed has dropped below the stable minimum.
pub fn is_stalled(v_a: f64, params: &KiteParams) -> bool {
    v_a < params.min_air_speed
}

fn add_scaled(state: &KiteState, d: &StateDerivative, h: f64) -> KiteState {
    KiteState {
        phi: state.phi + h * d.phi_dot,
        theta: state.theta + h * d.theta_dot,
        psi: state.psi + h * d.psi_dot,
        l: state.l + h * d.l_dot,
    }
}

/// One classic RK4 step with inputs held over the step.
pub fn integrate_step(
    state: &KiteState,
    input: &ControlInput,
    wind: &WindCondition,
    params: &KiteParams,
    dt: f64,
) -> Result<KiteState> {
    check(dt > 0.0, "dt", "time step must be positive")?;
    let eval = |s: &KiteState| {
        let v_a = air_path_speed(s, input.v_winch, wind, params);
        derivatives(s, input, v_a, wind, params)
    };
    let k1 = eval(state)?;
    let k2 = eval(&add_scaled(state, &k1, 0.5 * dt))?;
    let k3 = eval(&add_scaled(state, &k2, 0.5 * dt))?;
    let k4 = eval(&add_scaled(state, &k3, dt))?;
    let sixth = dt / 6.0;
    let next = KiteState {
        phi: state.phi + sixth * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot),
        theta: state.theta
            + sixth * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot),
        psi: state.psi + sixth * (k1.psi_dot + 2.0 * k2.psi_dot + 2.0 * k3.psi_dot + k4.psi_dot),
        // l_dot is constant over the step, so this is exact.
        l: state.l + dt * input.v_winch,
    };
    guard_theta(next.theta)?;
    Ok(next)
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}
