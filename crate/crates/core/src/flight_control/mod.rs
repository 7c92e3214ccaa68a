//! Cascaded flight controller: an outer heading loop that shapes step
//! set-points into time-optimal curves, feeding an inner turn-rate loop.

mod actuator;
mod inner;
mod outer;

pub use actuator::{ActuatorModel, LowPass};
pub use inner::{GravityAttitude, InnerLoop, InnerLoopConfig, InnerLoopOutput};
pub use outer::{CrosstermMode, OuterLoop, OuterLoopConfig, OuterLoopOutput};

use crate::error::{KiteError, Result};
use crate::model::KiteParams;

/// Air path speed below which `1/K` is not formed.
pub const V_FLOOR: f64 = 1.0;

/// Turn-rate gain `K = g_k v_a` of the linearised plant.
pub fn k_psidot(v_a: f64, params: &KiteParams) -> Result<f64> {
    if v_a < V_FLOOR || !v_a.is_finite() {
        return Err(KiteError::LowAirspeed { v_a });
    }
    Ok(params.steering_gain * v_a)
}

/// Braking-parabola deflection `sign(x) sqrt(2 rate |x| / K)` for a
/// heading error `x`: the deflection from which ramping back to zero at
/// the full rate ends exactly on target.
pub fn f_scaling(x: f64, max_rate: f64, k: f64) -> f64 {
    x.signum() * (2.0 * max_rate * x.abs() / k).sqrt()
}

/// Full initial deflection of the braking process including the rate
/// terms, `f(x) - (psi_dot_ct_star - psi_dot_s)/K`.
pub fn braking_deflection(
    x: f64,
    psi_dot_ct_star: f64,
    psi_dot_s: f64,
    max_rate: f64,
    k: f64,
) -> f64 {
    f_scaling(x, max_rate, k) - (psi_dot_ct_star - psi_dot_s) / k
}
