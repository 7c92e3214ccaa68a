//! Fixed-step closed loop: sensors, guidance, heading and turn-rate
//! loops, winch laws and drive, plant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::{SimConfig, WindSource};
use super::telemetry::TelemetryRecord;
use crate::error::{KiteError, Result};
use crate::flight_control::{InnerLoop, OuterLoop};
use crate::guidance::{CycleController, CyclePhase, SpherePos};
use crate::model::{self, ControlInput, KiteState, WindCondition};
use crate::parallel::par_map;
use crate::winch::{self, WinchState};

/// What the controllers see.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
    pub l: f64,
    pub l_dot: f64,
    pub psi_dot: f64,
    pub v_a: f64,
}

/// Controller internals of the last sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlTrace {
    /// Inertial turn-rate set-point and measurement (rad/s).
    pub psi_dot_s_prime: f64,
    pub psi_dot_m_prime: f64,
    pub delta_ff: f64,
    pub delta_fb: f64,
    pub psi_m: f64,
    pub psi_c: f64,
    pub psi_s: f64,
    /// The active target changed at this sample.
    pub switched: bool,
}

pub struct Simulation {
    cfg: SimConfig,
    state: KiteState,
    step_index: u64,
    guidance: CycleController,
    outer: OuterLoop,
    inner: InnerLoop,
    winch: WinchState,
    delta: f64,
    last_psi_s: Option<f64>,
    trace: ControlTrace,
    rng: Option<ChaCha8Rng>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let rng = (!cfg.sensors.is_ideal()).then(|| ChaCha8Rng::seed_from_u64(cfg.sim.seed));
        Ok(Self {
            state: cfg.initial.state(),
            step_index: 0,
            guidance: CycleController::new(cfg.cycle, cfg.initial.phase.into()),
            outer: OuterLoop::new(cfg.outer, &cfg.kite),
            inner: InnerLoop::new(cfg.inner, &cfg.kite),
            winch: WinchState::with_speed(cfg.winch, cfg.initial.l_dot),
            delta: 0.0,
            last_psi_s: None,
            trace: ControlTrace::default(),
            rng,
            cfg,
        })
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.cfg.sim.dt
    }

    pub fn state(&self) -> &KiteState {
        &self.state
    }

    pub fn phase(&self) -> CyclePhase {
        self.guidance.phase()
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn last_trace(&self) -> &ControlTrace {
        &self.trace
    }

    fn noise(&mut self, sigma: f64) -> f64 {
        match (&mut self.rng, Normal::new(0.0, sigma)) {
            (Some(rng), Ok(n)) if sigma > 0.0 => n.sample(rng),
            _ => 0.0,
        }
    }

    fn measure(&mut self, v_a: f64, l_dot: f64, wind: &WindCondition) -> Result<Measurement> {
        let input = ControlInput::new(self.delta, l_dot);
        let d = model::derivatives(&self.state, &input, v_a, wind, &self.cfg.kite)?;
        let s = self.cfg.sensors;
        Ok(Measurement {
            phi: self.state.phi + self.noise(s.phi),
            theta: self.state.theta + self.noise(s.theta),
            psi: self.state.psi + self.noise(s.psi),
            l: self.state.l + self.noise(s.l),
            l_dot,
            psi_dot: d.psi_dot + self.noise(s.psi_dot),
            v_a: v_a + self.noise(s.v_a),
        })
    }

    /// Advance one sample and return its telemetry.
    pub fn step(&mut self) -> Result<TelemetryRecord> {
        let dt = self.cfg.sim.dt;
        let t = self.time();
        let params = self.cfg.kite;
        let v_w = self.cfg.wind.at(t);
        let wind = WindCondition::new(v_w);

        let l_dot_prev = self.winch.l_dot();
        let v_a = model::air_path_speed(&self.state, l_dot_prev, &wind, &params);
        if v_w <= 0.0 || model::is_stalled(v_a, &params) {
            return Err(KiteError::Stall { t, v_a });
        }
        let m = self.measure(v_a, l_dot_prev, &wind)?;
        let law_wind = WindCondition::new(match self.cfg.sensors.wind_source {
            WindSource::Measured => v_w,
            WindSource::Nominal => self.cfg.wind.v_w,
        });

        let g = self.guidance.update(
            SpherePos::new(m.phi, m.theta),
            m.l,
            m.l_dot,
            m.psi,
            &law_wind,
            &params,
        )?;
        let measured_state = KiteState::new(m.phi, m.theta, m.psi, m.l);
        let psi_dot_ct = model::crossterm(&measured_state, m.v_a)?;
        // set-point rate between target switches
        let psi_dot_s = match self.last_psi_s {
            Some(prev) if !g.switched => (g.psi_s - prev) / dt,
            _ => 0.0,
        };
        self.last_psi_s = Some(g.psi_s);

        let psi_c = self.outer.psi_c().unwrap_or(m.psi);
        let psi_dot_m_prime = m.psi_dot - psi_dot_ct;
        let mut trace = ControlTrace {
            psi_dot_m_prime,
            psi_m: m.psi,
            psi_c,
            psi_s: g.psi_s,
            switched: g.switched,
            ..ControlTrace::default()
        };
        let steered = self
            .outer
            .step(g.psi_s, m.psi, psi_dot_ct, psi_dot_s, m.v_a, &params, dt)
            .and_then(|o| {
                trace.psi_dot_s_prime = o.psi_dot_s_prime;
                self.inner
                    .step(o.psi_dot_s_prime, psi_dot_m_prime, m.v_a, None, &params, dt)
            });
        let delta = match steered {
            Ok(out) => {
                trace.delta_ff = out.delta_ff;
                trace.delta_fb = out.delta_fb;
                out.delta
            }
            Err(KiteError::LowAirspeed { .. }) => self.inner.hold(dt),
            Err(e) => return Err(e),
        };
        self.trace = trace;

        let wc = &self.cfg.winch;
        let command = match g.phase {
            CyclePhase::Power(_) => winch::power_phase_speed(m.v_a, wc, &params),
            CyclePhase::Transfer | CyclePhase::Return => {
                winch::transfer_return_speed(m.theta, law_wind.v_w, wc)
            }
            CyclePhase::Restart => winch::restart_speed(m.theta, law_wind.v_w, wc, &params),
        };
        let l_dot = self
            .winch
            .step_with_force(command, model::tether_force(m.v_a, &params), dt);

        let v_a_applied = model::air_path_speed(&self.state, l_dot, &wind, &params);
        let force = model::tether_force(v_a_applied, &params);
        let record = TelemetryRecord {
            t,
            phi: self.state.phi,
            theta: self.state.theta,
            psi: self.state.psi,
            l: self.state.l,
            delta,
            v_winch_cmd: command,
            v_winch_actual: l_dot,
            v_a: v_a_applied,
            gamma_s: g.gamma_s,
            psi_s: g.psi_s,
            psi_c,
            phase: g.phase,
            force,
            p_mech: force * l_dot,
        };

        self.state = model::integrate_step(
            &self.state,
            &ControlInput::new(delta, l_dot),
            &wind,
            &params,
            dt,
        )?;
        self.delta = delta;
        self.step_index += 1;
        Ok(record)
    }
}

/// Telemetry of a run and the error that ended it early, if any.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub records: Vec<TelemetryRecord>,
    pub abort: Option<KiteError>,
}

/// Run for the configured duration, handing each record to `observer`
/// as it is produced. A model or controller error stops the run; the
/// records up to that point are kept.
pub fn run_simulation_with<F>(cfg: &SimConfig, mut observer: F) -> Result<SimRun>
where
    F: FnMut(&TelemetryRecord) -> Result<()>,
{
    let mut sim = Simulation::new(cfg.clone())?;
    let steps = (cfg.sim.duration / cfg.sim.dt).round() as u64;
    let mut records = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        match sim.step() {
            Ok(rec) => {
                observer(&rec)?;
                records.push(rec);
            }
            Err(e) => {
                return Ok(SimRun {
                    records,
                    abort: Some(e),
                })
            }
        }
    }
    Ok(SimRun {
        records,
        abort: None,
    })
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimRun> {
    run_simulation_with(cfg, |_| Ok(()))
}

/// Independent runs, one per config, in input order.
pub fn run_batch(cfgs: &[SimConfig]) -> Vec<Result<SimRun>> {
    par_map(cfgs, run_simulation)
}
