//! Target-point guidance on the unit sphere and the cycle state machine.
//!
//! During the power phase the kite heads for TP1 and TP2 alternately,
//! switching before the active point is reached, which produces the
//! figure-eight. Transfer and return head for TP3, which is kept out of
//! reach by placing it above the kite.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{check, KiteError, Result};
use crate::model::{self, KiteParams, WindCondition};

/// Angular distance below which the course to a target point is undefined.
pub const TARGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TpId {
    Tp1,
    Tp2,
    Tp3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPoint {
    pub phi: f64,
    pub theta: f64,
    pub id: TpId,
}

/// Measured position on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SpherePos {
    pub phi: f64,
    pub theta: f64,
}

impl SpherePos {
    pub fn new(phi: f64, theta: f64) -> Self {
        Self { phi, theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CyclePhase {
    Power(TpId),
    Transfer,
    Return,
    Restart,
}

impl CyclePhase {
    pub fn label(&self) -> &'static str {
        match self {
            CyclePhase::Power(TpId::Tp2) => "power_tp2",
            CyclePhase::Power(_) => "power_tp1",
            CyclePhase::Transfer => "transfer",
            CyclePhase::Return => "return",
            CyclePhase::Restart => "restart",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Some(match label {
            "power_tp1" => CyclePhase::Power(TpId::Tp1),
            "power_tp2" => CyclePhase::Power(TpId::Tp2),
            "transfer" => CyclePhase::Transfer,
            "return" => CyclePhase::Return,
            "restart" => CyclePhase::Restart,
            _ => return None,
        })
    }

    pub fn is_power(&self) -> bool {
        matches!(self, CyclePhase::Power(_))
    }

    /// Edges of the cycle state diagram.
    pub fn can_transition_to(&self, next: &CyclePhase) -> bool {
        use CyclePhase::*;
        if self == next {
            return true;
        }
        matches!(
            (self, next),
            (Power(TpId::Tp1), Power(TpId::Tp2))
                | (Power(TpId::Tp2), Power(TpId::Tp1))
                | (Power(TpId::Tp1), Transfer)
                | (Transfer, Return)
                | (Return, Restart)
                | (Restart, Power(TpId::Tp1))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CycleConfig {
    /// Azimuth of TP1; TP2 mirrors it.
    pub phi_tp1: f64,
    /// Elevation angle of TP1 and TP2.
    pub theta_tp1: f64,
    /// Trigger radius (rad).
    pub sigma: f64,
    pub l_transfer: f64,
    pub l_restart: f64,
    /// TP3 is kept this far above the kite.
    pub delta_theta_tp3: f64,
    pub phi_tp3: f64,
    /// Transfer ends and return begins once theta passes this angle.
    pub return_theta: f64,
    /// Restart also ends once theta drops this far below `return_theta`.
    pub restart_margin: f64,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            phi_tp1: 0.6,
            theta_tp1: 1.0,
            sigma: 0.15,
            l_transfer: 270.0,
            l_restart: 150.0,
            delta_theta_tp3: 0.3,
            phi_tp3: 0.4,
            return_theta: 1.05,
            restart_margin: 0.1,
        }
    }
}

impl CycleConfig {
    pub fn validate(&self) -> Result<()> {
        check(
            self.sigma > 0.0 && self.sigma < 0.5,
            "sigma",
            "must be in (0, 0.5)",
        )?;
        check(
            self.l_restart < self.l_transfer,
            "l_restart",
            "must be below l_transfer",
        )?;
        check(
            self.theta_tp1 > 0.0 && self.theta_tp1 < PI,
            "theta_tp1",
            "must be in (0, pi)",
        )
    }

    pub fn tp1(&self) -> TargetPoint {
        TargetPoint {
            phi: self.phi_tp1,
            theta: self.theta_tp1,
            id: TpId::Tp1,
        }
    }

    pub fn tp2(&self) -> TargetPoint {
        TargetPoint {
            phi: -self.phi_tp1,
            theta: self.theta_tp1,
            id: TpId::Tp2,
        }
    }
}

/// Great-circle course from `pos` toward `tp`, measured from the `+theta`
/// meridian like the flight direction.
pub fn target_direction(pos: SpherePos, tp: &TargetPoint) -> Result<f64> {
    let dist = great_circle_distance(pos, tp);
    if dist < TARGET_TOL {
        return Err(KiteError::SingularAtTarget);
    }
    let y = (pos.phi - tp.phi).sin();
    let x = pos.theta.cos() * (tp.phi - pos.phi).cos() - pos.theta.sin() / tp.theta.tan();
    Ok(y.atan2(x))
}

fn great_circle_distance(pos: SpherePos, tp: &TargetPoint) -> f64 {
    // unit vectors with the wind axis as pole
    let a = [
        pos.theta.cos(),
        pos.phi.sin() * pos.theta.sin(),
        pos.phi.cos() * pos.theta.sin(),
    ];
    let b = [
        tp.theta.cos(),
        tp.phi.sin() * tp.theta.sin(),
        tp.phi.cos() * tp.theta.sin(),
    ];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    sin.atan2(cos)
}

/// Shift `gamma_raw` by whole turns to the value closest to `gamma_prev`.
pub fn unwrap_course(gamma_raw: f64, gamma_prev: f64) -> f64 {
    let k = ((gamma_prev - gamma_raw) / TAU).round();
    gamma_raw + k * TAU
}

/// Sense of a commanded curve in terms of the course angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Increasing,
    Decreasing,
}

/// Shift `gamma_raw` by whole turns so that going from `gamma_prev` to the
/// result turns in `direction` by less than one full turn.
pub fn unwrap_course_directed(gamma_raw: f64, gamma_prev: f64, direction: TurnDirection) -> f64 {
    match direction {
        TurnDirection::Increasing => {
            let k = ((gamma_prev - gamma_raw) / TAU).floor() + 1.0;
            let g = gamma_raw + k * TAU;
            if g - gamma_prev > TAU {
                g - TAU
            } else {
                g
            }
        }
        TurnDirection::Decreasing => {
            let k = ((gamma_prev - gamma_raw) / TAU).ceil() - 1.0;
            let g = gamma_raw + k * TAU;
            if gamma_prev - g > TAU {
                g + TAU
            } else {
                g
            }
        }
    }
}

/// Squared "angular" distance used by the switching trigger.
pub fn trigger_metric(pos: SpherePos, tp: &TargetPoint) -> f64 {
    let dphi = pos.phi - tp.phi;
    let dtheta = pos.theta - tp.theta;
    dphi * dphi * tp.theta.sin().powi(2) + dtheta * dtheta
}

pub fn trigger(pos: SpherePos, tp: &TargetPoint, sigma: f64) -> bool {
    trigger_metric(pos, tp) <= sigma * sigma
}

/// TP3 placed above the kite so it is never reached.
pub fn tp3_position(pos: SpherePos, cfg: &CycleConfig) -> TargetPoint {
    TargetPoint {
        phi: cfg.phi_tp3,
        theta: FRAC_PI_2.max(pos.theta + cfg.delta_theta_tp3),
        id: TpId::Tp3,
    }
}

/// Active target point for a phase.
pub fn active_target(phase: CyclePhase, pos: SpherePos, cfg: &CycleConfig) -> TargetPoint {
    match phase {
        CyclePhase::Power(TpId::Tp2) => cfg.tp2(),
        CyclePhase::Power(_) | CyclePhase::Restart => cfg.tp1(),
        CyclePhase::Transfer | CyclePhase::Return => tp3_position(pos, cfg),
    }
}

/// Advance the state machine by one sample.
pub fn cycle_step(
    phase: CyclePhase,
    pos: SpherePos,
    l: f64,
    cfg: &CycleConfig,
) -> (CyclePhase, TargetPoint) {
    let next = match phase {
        CyclePhase::Power(TpId::Tp2) => {
            if trigger(pos, &cfg.tp2(), cfg.sigma) {
                CyclePhase::Power(TpId::Tp1)
            } else {
                phase
            }
        }
        CyclePhase::Power(_) => {
            if trigger(pos, &cfg.tp1(), cfg.sigma) {
                if l >= cfg.l_transfer {
                    CyclePhase::Transfer
                } else {
                    CyclePhase::Power(TpId::Tp2)
                }
            } else {
                CyclePhase::Power(TpId::Tp1)
            }
        }
        CyclePhase::Transfer => {
            if pos.theta >= cfg.return_theta {
                CyclePhase::Return
            } else {
                phase
            }
        }
        CyclePhase::Return => {
            if l <= cfg.l_restart {
                CyclePhase::Restart
            } else {
                phase
            }
        }
        CyclePhase::Restart => {
            if trigger(pos, &cfg.tp1(), cfg.sigma)
                || pos.theta < cfg.return_theta - cfg.restart_margin
            {
                CyclePhase::Power(TpId::Tp1)
            } else {
                phase
            }
        }
    };
    (next, active_target(next, pos, cfg))
}

/// Radius of a curve flown at full deflection.
pub fn curve_radius(max_deflection: f64, params: &KiteParams) -> f64 {
    1.0 / (params.steering_gain * max_deflection)
}

/// Course and heading set-point toward `tp`.
///
/// The course is unwrapped against `gamma_prev` and the heading returned
/// on the branch closest to that course.
pub fn setpoint_psi(
    pos: SpherePos,
    tp: &TargetPoint,
    gamma_prev: f64,
    l_dot: f64,
    wind: &WindCondition,
    params: &KiteParams,
) -> Result<(f64, f64)> {
    let gamma = unwrap_course(target_direction(pos, tp)?, gamma_prev);
    let psi = model::psi_from_gamma(gamma, pos.theta, l_dot, wind, params)?;
    Ok((gamma, unwrap_course(psi, gamma)))
}

/// Guidance output for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guidance {
    pub phase: CyclePhase,
    pub target: TargetPoint,
    /// Unwrapped course toward the target.
    pub gamma_s: f64,
    /// Course in `(-pi, pi]` before unwrapping.
    pub gamma_raw: f64,
    pub psi_s: f64,
    /// The target changed at this sample.
    pub switched: bool,
}

/// Owns the cycle phase and keeps course and heading set-points continuous
/// between target switches.
///
/// When the power phase switches between TP1 and TP2 the new course is
/// unwrapped in the turning sense that flies the outside curve, away from
/// the centre of the pattern, which gives the figure-eight-down.
#[derive(Debug, Clone)]
pub struct CycleController {
    cfg: CycleConfig,
    phase: CyclePhase,
    gamma_s: Option<f64>,
    psi_s: Option<f64>,
}

impl CycleController {
    pub fn new(cfg: CycleConfig, phase: CyclePhase) -> Self {
        Self {
            cfg,
            phase,
            gamma_s: None,
            psi_s: None,
        }
    }

    pub fn phase(&self) -> CyclePhase {
        self.phase
    }

    pub fn config(&self) -> &CycleConfig {
        &self.cfg
    }

    fn turn_sense(&self, from: CyclePhase, to: CyclePhase) -> Option<TurnDirection> {
        let departed_phi = match (from, to) {
            (CyclePhase::Power(TpId::Tp1), CyclePhase::Power(TpId::Tp2)) => self.cfg.phi_tp1,
            (CyclePhase::Power(TpId::Tp2), CyclePhase::Power(TpId::Tp1)) => -self.cfg.phi_tp1,
            (CyclePhase::Return, CyclePhase::Restart) => self.cfg.phi_tp3,
            _ => return None,
        };
        Some(if departed_phi >= 0.0 {
            TurnDirection::Decreasing
        } else {
            TurnDirection::Increasing
        })
    }

    /// Advance the phase and compute set-points.
    ///
    /// `psi_m` seeds the course on the first call. When the heading
    /// inversion has no solution the previous heading set-point is held.
    pub fn update(
        &mut self,
        pos: SpherePos,
        l: f64,
        l_dot: f64,
        psi_m: f64,
        wind: &WindCondition,
        params: &KiteParams,
    ) -> Result<Guidance> {
        let from = self.phase;
        let (phase, target) = cycle_step(from, pos, l, &self.cfg);
        self.phase = phase;
        let switched = from != phase && active_target(from, pos, &self.cfg).id != target.id;

        // sitting exactly on the target: keep the previous course
        let gamma_raw = match target_direction(pos, &target) {
            Ok(g) => g,
            Err(KiteError::SingularAtTarget) => {
                self.gamma_s.map(model::wrap_angle).unwrap_or(psi_m)
            }
            Err(e) => return Err(e),
        };
        let gamma_s = match (
            self.gamma_s,
            switched.then(|| self.turn_sense(from, phase)).flatten(),
        ) {
            (None, _) => {
                let seed =
                    model::gamma_from_psi(psi_m, pos.theta, l_dot, wind, params).unwrap_or(psi_m);
                unwrap_course(gamma_raw, seed)
            }
            (Some(prev), Some(dir)) => unwrap_course_directed(gamma_raw, prev, dir),
            (Some(prev), None) => unwrap_course(gamma_raw, prev),
        };
        self.gamma_s = Some(gamma_s);

        let psi_s = match model::psi_from_gamma(gamma_s, pos.theta, l_dot, wind, params) {
            Ok(raw) => match self.psi_s {
                Some(prev) if !switched => unwrap_course(raw, prev),
                _ => unwrap_course(raw, gamma_s),
            },
            Err(KiteError::NoSolution { .. }) | Err(KiteError::SingularAirflow { .. }) => {
                self.psi_s.unwrap_or(psi_m)
            }
            Err(e) => return Err(e),
        };
        self.psi_s = Some(psi_s);

        Ok(Guidance {
            phase,
            target,
            gamma_s,
            gamma_raw,
            psi_s,
            switched,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn tp(phi: f64, theta: f64) -> TargetPoint {
        TargetPoint {
            phi,
            theta,
            id: TpId::Tp1,
        }
    }

    #[test]
    fn target_direction_examples() {
        let g = target_direction(SpherePos::new(0.3, 0.8), &tp(0.3, 1.2)).unwrap();
        assert_eq!(g, 0.0);
        let g = target_direction(SpherePos::new(0.65, 1.0), &tp(0.0, 1.2)).unwrap();
        // atan2(sin 0.65, cos 1 cos 0.65 - sin 1 / tan 1.2)
        assert_abs_diff_eq!(g, 1.40225, epsilon = 5e-5);
        let g_mirror = target_direction(SpherePos::new(-0.65, 1.0), &tp(0.0, 1.2)).unwrap();
        assert_abs_diff_eq!(g_mirror, -g, epsilon = 1e-15);
        assert_eq!(
            target_direction(SpherePos::new(0.2, 1.0), &tp(0.2, 1.0)).unwrap_err(),
            KiteError::SingularAtTarget
        );
    }

    #[test]
    fn unwrap_examples() {
        assert_eq!(unwrap_course(-1.0, 1.0), -1.0);
        assert_abs_diff_eq!(unwrap_course(-1.0, 5.9), 5.2832, epsilon = 5e-5);
        let once = unwrap_course(-1.0, 5.9);
        assert_eq!(unwrap_course(once, 5.9), once);
    }

    #[test]
    fn directed_unwrap_takes_the_long_way() {
        // switching from a course of 1.0 to -1.0 the other way round
        assert_abs_diff_eq!(
            unwrap_course_directed(-1.0, 1.0, TurnDirection::Increasing),
            TAU - 1.0,
            epsilon = 1e-12
        );
        assert_eq!(
            unwrap_course_directed(-1.0, 1.0, TurnDirection::Decreasing),
            -1.0
        );
        assert_abs_diff_eq!(
            unwrap_course_directed(2.0, 1.0, TurnDirection::Decreasing),
            2.0 - TAU,
            epsilon = 1e-12
        );
    }

    #[test]
    fn trigger_examples() {
        let t = tp(0.6, 1.0);
        let pos = SpherePos::new(0.65, 1.02);
        assert_abs_diff_eq!(trigger_metric(pos, &t), 0.0021702, epsilon = 5e-8);
        assert!(trigger(pos, &t, 0.1));
        assert!(!trigger(pos, &t, 0.04));
        assert!(trigger(SpherePos::new(0.6, 1.0), &t, 1e-6));
    }

    #[test]
    fn tp3_examples() {
        let cfg = CycleConfig::default();
        let t = tp3_position(SpherePos::new(0.1, 1.0), &cfg);
        assert_abs_diff_eq!(t.theta, FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(t.phi, 0.4);
        let t = tp3_position(SpherePos::new(0.1, 1.5), &cfg);
        assert_abs_diff_eq!(t.theta, 1.8, epsilon = 1e-15);
    }

    #[test]
    fn cycle_step_examples() {
        let cfg = CycleConfig::default();
        let at_tp1 = SpherePos::new(cfg.phi_tp1, cfg.theta_tp1);
        let (p, t) = cycle_step(CyclePhase::Power(TpId::Tp1), at_tp1, 280.0, &cfg);
        assert_eq!(p, CyclePhase::Transfer);
        assert_eq!(t.id, TpId::Tp3);

        let (p, _) = cycle_step(CyclePhase::Return, SpherePos::new(0.4, 1.8), 129.0, &cfg);
        assert_eq!(p, CyclePhase::Restart);

        let far = SpherePos::new(-0.3, 0.7);
        let (p, t) = cycle_step(CyclePhase::Power(TpId::Tp1), far, 200.0, &cfg);
        assert_eq!(p, CyclePhase::Power(TpId::Tp1));
        assert_eq!(t.id, TpId::Tp1);

        let (p, t) = cycle_step(CyclePhase::Power(TpId::Tp1), at_tp1, 200.0, &cfg);
        assert_eq!(p, CyclePhase::Power(TpId::Tp2));
        assert_eq!(t.phi, -cfg.phi_tp1);

        let (p, _) = cycle_step(CyclePhase::Transfer, SpherePos::new(0.5, 1.06), 270.0, &cfg);
        assert_eq!(p, CyclePhase::Return);
        let (p, _) = cycle_step(CyclePhase::Restart, SpherePos::new(0.5, 0.9), 120.0, &cfg);
        assert_eq!(p, CyclePhase::Power(TpId::Tp1));
    }

    #[test]
    fn curve_radius_examples() {
        let p = KiteParams {
            steering_gain: 0.05,
            ..KiteParams::default()
        };
        assert_abs_diff_eq!(curve_radius(0.3, &p), 66.6667, epsilon = 1e-4);
        assert_abs_diff_eq!(
            curve_radius(0.6, &p),
            curve_radius(0.3, &p) / 2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn setpoint_inverts_course_map() {
        let p = KiteParams::default();
        let w = WindCondition::new(10.0);
        assert_abs_diff_eq!(
            model::psi_from_gamma_c1(1.234, 0.0).unwrap(),
            1.234,
            epsilon = 1e-15
        );
        let pos = SpherePos::new(0.0, 0.8);
        let target = tp(0.5, 1.0);
        let (gamma, psi) = setpoint_psi(pos, &target, 0.0, 2.0, &w, &p).unwrap();
        let back = model::gamma_from_psi(psi, pos.theta, 2.0, &w, &p).unwrap();
        assert_abs_diff_eq!(unwrap_course(back, gamma), gamma, epsilon = 1e-12);
    }

    #[test]
    fn transition_table() {
        use CyclePhase::*;
        assert!(Power(TpId::Tp1).can_transition_to(&Transfer));
        assert!(!Power(TpId::Tp2).can_transition_to(&Transfer));
        assert!(!Return.can_transition_to(&Power(TpId::Tp1)));
        assert!(Restart.can_transition_to(&Power(TpId::Tp1)));
        for p in [
            Power(TpId::Tp1),
            Power(TpId::Tp2),
            Transfer,
            Return,
            Restart,
        ] {
            assert_eq!(CyclePhase::from_label(p.label()), Some(p));
        }
    }

    proptest! {
        #[test]
        fn state_machine_only_takes_diagram_edges(
            steps in prop::collection::vec((-1.0f64..1.0, 0.3f64..2.2, 100.0f64..300.0), 1..300)
        ) {
            let cfg = CycleConfig::default();
            let mut phase = CyclePhase::Power(TpId::Tp1);
            for (phi, theta, l) in steps {
                let (next, _) = cycle_step(phase, SpherePos::new(phi, theta), l, &cfg);
                prop_assert!(phase.can_transition_to(&next), "{:?} -> {:?}", phase, next);
                phase = next;
            }
        }

        #[test]
        fn trigger_metric_is_a_local_metric(dphi in -0.5f64..0.5, dtheta in -0.5f64..0.5, theta in 0.3f64..1.5) {
            let t = tp(0.2, theta);
            let m = trigger_metric(SpherePos::new(0.2 + dphi, theta + dtheta), &t);
            let mirrored = trigger_metric(SpherePos::new(0.2 - dphi, theta - dtheta), &t);
            prop_assert!(m >= 0.0);
            prop_assert!((m - mirrored).abs() < 1e-12);
            prop_assert_eq!(m == 0.0, dphi == 0.0 && dtheta == 0.0);
            let bigger = trigger_metric(SpherePos::new(0.2 + 1.5 * dphi, theta + dtheta), &t);
            prop_assert!(bigger >= m);
        }

        #[test]
        fn directed_unwrap_properties(raw in -PI..PI, prev in -20.0f64..20.0) {
            let up = unwrap_course_directed(raw, prev, TurnDirection::Increasing);
            prop_assert!(up > prev - 1e-12 && up - prev <= TAU + 1e-12);
            let down = unwrap_course_directed(raw, prev, TurnDirection::Decreasing);
            prop_assert!(down < prev + 1e-12 && prev - down <= TAU + 1e-12);
            let k = (up - raw) / TAU;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }

        #[test]
        fn target_direction_antisymmetric(dphi in 0.01f64..0.8, theta in 0.4f64..1.4, theta_tp in 0.4f64..1.4) {
            let t = tp(0.0, theta_tp);
            let a = target_direction(SpherePos::new(dphi, theta), &t).unwrap();
            let b = target_direction(SpherePos::new(-dphi, theta), &t).unwrap();
            prop_assert!((a + b).abs() < 1e-12);
        }
    }
}
