//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test --test acceptance`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kitecycle::harness::{
    energy_accounting, ControlTrace, SimConfig, Simulation, TelemetryRecord, TelemetryWriter,
};
use kitecycle::model::{self, ControlInput, KiteParams, KiteState, WindCondition};
use kitecycle::optimizer::{
    fit_winch_law, loyd_limit, optimize_cycle, seed_decision, OptimizerConfig,
};

const FLIGHT_TEST: &str = include_str!("../../../configs/flight_test.toml");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

fn rms(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    (s / n as f64).sqrt()
}

fn loyd_criterion() -> Outcome {
    let cfg = match SimConfig::from_toml_str(FLIGHT_TEST) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("config: {e}")),
    };
    let p = loyd_limit(&cfg.wind.nominal(), &cfg.kite);
    // 4 E^2 / 27 * rho C_R A / 2 * v_w^3 by hand
    let oracle = 4.0 * 25.0 / 27.0 * (1.2 * 1.0 * 21.0 / 2.0) * 421.875;
    outcome(
        (p - 19687.5).abs() < 1e-9 && (p - oracle).abs() < 1e-9,
        format!("P_Loyd = {p} W (expected 19687.5)"),
    )
}

struct Optimum {
    ratio: f64,
    seconds: f64,
    fit: Result<(f64, f64), String>,
}

fn run_optimizer() -> Result<Optimum, String> {
    let cfg = OptimizerConfig::default();
    let start = Instant::now();
    let cycle = optimize_cycle(
        &cfg,
        &WindCondition::new(10.0),
        &KiteParams::default(),
        &seed_decision(&cfg),
    )
    .map_err(|e| e.to_string())?;
    let seconds = start.elapsed().as_secs_f64();
    let fit = fit_winch_law(&cycle)
        .map(|f| (f.theta0, f.slope))
        .map_err(|e| e.to_string());
    Ok(Optimum {
        ratio: cycle.ratio,
        seconds,
        fit,
    })
}

fn optimizer_criterion(opt: &Result<Optimum, String>) -> Outcome {
    match opt {
        Ok(o) => outcome(
            (0.18..=0.30).contains(&o.ratio) && o.seconds < 300.0,
            format!(
                "P_bar/P_Loyd = {:.4} in [0.18, 0.30], {:.1} s (< 300 s)",
                o.ratio, o.seconds
            ),
        ),
        Err(e) => outcome(false, e.clone()),
    }
}

fn fit_criterion(opt: &Result<Optimum, String>) -> Outcome {
    match opt.as_ref().map(|o| &o.fit) {
        Ok(Ok((theta0, slope))) => outcome(
            (theta0 - 1.05).abs() <= 0.15 && (-0.8..=-0.4).contains(slope),
            format!("theta0 = {theta0:.4} rad (1.05 +- 0.15), slope = {slope:.4} in [-0.8, -0.4]"),
        ),
        Ok(Err(e)) | Err(e) => outcome(false, e.clone()),
    }
}

fn equilibrium_criterion() -> Outcome {
    let p = KiteParams::default();
    let v_w = 10.0;
    let wind = WindCondition::new(v_w);
    let mut worst: f64 = 0.0;
    for i in 0..=24 {
        let psi = 1.2 * i as f64 / 24.0;
        for j in 0..=16 {
            let l_dot = v_w * (-0.5 + 0.8 * j as f64 / 16.0);
            let theta = match model::equilibrium_theta(psi, l_dot, &wind, &p) {
                Ok(t) => t,
                Err(e) => return outcome(false, format!("psi {psi}, l_dot {l_dot}: {e}")),
            };
            let state = KiteState::new(0.0, theta, psi, 1.0);
            let v_a = model::air_path_speed(&state, l_dot, &wind, &p);
            match model::derivatives(&state, &ControlInput::new(0.0, l_dot), v_a, &wind, &p) {
                Ok(d) => worst = worst.max(d.theta_dot.abs()),
                Err(e) => return outcome(false, e.to_string()),
            }
        }
    }
    let reel_in = model::equilibrium_theta(0.0, -0.5 * v_w, &wind, &p).unwrap_or(f64::NAN);
    let e = p.glide_ratio;
    let oracle = FRAC_PI_2 - (1.0 / e).atan() + (0.5 / (1.0 + 1.0 / (e * e)).sqrt()).asin();
    outcome(
        worst < 1e-9 && (reel_in - oracle).abs() < 1e-12 && (reel_in - 1.886).abs() < 5e-4 && reel_in < 1.9,
        format!("max |theta_dot| = {worst:.2e} (< 1e-9) on 25x17 grid at l = 1 m; reel-in case theta = {reel_in:.5}"),
    )
}

fn inversion_criterion() -> Outcome {
    let p = KiteParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut valid, mut drawn) = (0usize, 0usize);
    let mut worst: f64 = 0.0;
    while valid < 10_000 {
        drawn += 1;
        let v_w = rng.gen_range(3.0..20.0);
        let theta = rng.gen_range(0.1..1.5);
        let l_dot = v_w * rng.gen_range(-0.5..0.3);
        let gamma = rng.gen_range(-PI..PI);
        let wind = WindCondition::new(v_w);
        let Ok(psi) = model::psi_from_gamma(gamma, theta, l_dot, &wind, &p) else {
            continue;
        };
        let back = match model::gamma_from_psi(psi, theta, l_dot, &wind, &p) {
            Ok(g) => g,
            Err(e) => return outcome(false, e.to_string()),
        };
        worst = worst.max(wrap(back - gamma).abs());
        valid += 1;
    }
    outcome(
        worst < 1e-12,
        format!("max |gamma - gamma(psi(gamma))| = {worst:.2e} (< 1e-12) over {valid} states ({drawn} drawn)"),
    )
}

fn crossterm_criterion() -> Outcome {
    let p = KiteParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let v_w = rng.gen_range(3.0..20.0);
        let state = KiteState::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_range(0.1..1.5),
            rng.gen_range(-PI..PI),
            rng.gen_range(50.0..500.0),
        );
        let l_dot = v_w * rng.gen_range(-0.5..0.3);
        let wind = WindCondition::new(v_w);
        let v_a = model::air_path_speed(&state, l_dot, &wind, &p);
        let input = ControlInput::new(0.0, l_dot);
        let (ct, d) = match (
            model::crossterm(&state, v_a),
            model::derivatives(&state, &input, v_a, &wind, &p),
        ) {
            (Ok(c), Ok(d)) => (c, d),
            (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
        };
        worst = worst.max((ct - d.phi_dot * state.theta.cos()).abs());
    }
    outcome(
        worst < 1e-12,
        format!("max |crossterm - phi_dot cos(theta)| = {worst:.2e} (< 1e-12) over 10000 states"),
    )
}

struct Run {
    cfg: SimConfig,
    records: Vec<TelemetryRecord>,
    traces: Vec<ControlTrace>,
    abort: Option<String>,
}

fn simulate(cfg: SimConfig) -> Run {
    let steps = (cfg.sim.duration / cfg.sim.dt).round() as usize;
    let mut records = Vec::with_capacity(steps);
    let mut traces = Vec::with_capacity(steps);
    let mut abort = None;
    match Simulation::new(cfg.clone()) {
        Ok(mut sim) => {
            for _ in 0..steps {
                match sim.step() {
                    Ok(r) => {
                        records.push(r);
                        traces.push(*sim.last_trace());
                    }
                    Err(e) => {
                        abort = Some(e.to_string());
                        break;
                    }
                }
            }
        }
        Err(e) => abort = Some(e.to_string()),
    }
    Run {
        cfg,
        records,
        traces,
        abort,
    }
}

fn closed_loop_criterion(run: &Run) -> Outcome {
    if let Some(e) = &run.abort {
        return outcome(false, format!("aborted: {e}"));
    }
    let reports = match energy_accounting(&run.records) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let k = &run.cfg.kite;
    let w = &run.cfg.winch;
    let dt = run.cfg.sim.dt;
    let mut violations = Vec::new();
    if run.records.iter().any(|r| r.delta.abs() > k.max_deflection) {
        violations.push("|delta| > delta_s");
    }
    if run
        .records
        .iter()
        .any(|r| r.v_winch_actual.abs() > w.l_dot_max)
    {
        violations.push("|l_dot| > l_dot_max");
    }
    let pairs = || run.records.windows(2);
    if pairs().any(|p| (p[1].delta - p[0].delta).abs() > k.max_deflection_rate * dt * (1.0 + 1e-9))
    {
        violations.push("deflection rate");
    }
    if pairs().any(|p| {
        (p[1].v_winch_actual - p[0].v_winch_actual).abs() > w.l_ddot_max * dt * (1.0 + 1e-9)
    }) {
        violations.push("winch acceleration");
    }
    let p_loyd = loyd_limit(&run.cfg.wind.nominal(), k);
    let ratios: Vec<f64> = reports.iter().map(|r| r.p_bar_cycle / p_loyd).collect();
    let net_positive = reports.iter().all(|r| r.w_in + r.w_out > 0.0);
    let in_band = ratios.iter().all(|x| (0.10..=0.30).contains(x));
    let ratio_text: Vec<String> = ratios.iter().map(|x| format!("{x:.3}")).collect();
    outcome(
        reports.len() >= 2 && net_positive && in_band && violations.is_empty(),
        format!(
            "{} cycles (>= 2), net positive: {net_positive}, P_bar_cycle/P_Loyd = [{}] in [0.10, 0.30], violations: {}",
            reports.len(),
            ratio_text.join(", "),
            if violations.is_empty() { "none".into() } else { violations.join(", ") }
        ),
    )
}

fn tracking_criterion(run: &Run) -> Outcome {
    if run.records.is_empty() {
        return outcome(false, "no telemetry".into());
    }
    let pattern = || {
        run.records
            .iter()
            .zip(&run.traces)
            .filter(|(r, _)| r.phase.is_power())
            .map(|(_, t)| t)
    };
    let inner = rms(pattern().map(|t| t.psi_dot_s_prime - t.psi_dot_m_prime));
    let share = rms(pattern().map(|t| t.delta_fb)) / rms(pattern().map(|t| t.delta_ff));
    let outer = rms(pattern().map(|t| t.psi_m - t.psi_c));
    outcome(
        inner < 0.05 && share < 0.2 && outer < 0.1,
        format!(
            "turn-rate error RMS {inner:.4} rad/s (< 0.05), feedback/feedforward RMS {share:.4} (< 0.2), psi_m - psi_c RMS {outer:.4} rad (< 0.1)"
        ),
    )
}

/// Each power-phase target switch starts a curve toward the new `psi_s`.
/// The curve ends when `psi` first reaches `psi_s`; overshoot is the
/// largest excursion past `psi_s` in the following 3 s.
fn shaping_criterion(run: &Run) -> Outcome {
    let recs = &run.records;
    let tr = &run.traces;
    let dt = run.cfg.sim.dt;
    let k = &run.cfg.kite;
    let settle = (3.0 / dt).round() as usize;
    let switches: Vec<usize> = (0..recs.len())
        .filter(|&i| tr[i].switched && recs[i].phase.is_power())
        .collect();
    let mut worst_overshoot: f64 = 0.0;
    let mut worst_rate: f64 = 0.0;
    let mut unfinished = 0;
    let mut truncated = 0;
    for (j, &i) in switches.iter().enumerate() {
        let next = switches.get(j + 1).copied().unwrap_or(recs.len());
        let s = (tr[i].psi_s - recs[i].psi).signum();
        let Some(reach) = (i..next).find(|&m| s * (recs[m].psi - tr[m].psi_s) >= 0.0) else {
            // a curve still running when the record ends is not judged
            if next == recs.len() {
                truncated += 1;
            } else {
                unfinished += 1;
            }
            continue;
        };
        let end = (reach + settle).min(next);
        for m in reach..end {
            worst_overshoot = worst_overshoot.max(s * (recs[m].psi - tr[m].psi_s));
        }
        for m in i.max(1)..end {
            worst_rate = worst_rate.max((recs[m].delta - recs[m - 1].delta).abs() / dt);
        }
    }

    let target = 1.0 / (k.steering_gain * k.max_deflection);
    let hold = (0.5 / dt).round() as usize;
    let mut radii = Vec::new();
    for i in hold.max(1)..recs.len().saturating_sub(1) {
        let saturated = (i - hold..=i + 1).all(|m| recs[m].delta.abs() == k.max_deflection);
        if !saturated || !recs[i].phase.is_power() {
            continue;
        }
        let (a, b) = (&recs[i - 1], &recs[i + 1]);
        let psi_dot = (b.psi - a.psi) / (2.0 * dt);
        let ct = (b.phi - a.phi) / (2.0 * dt) * recs[i].theta.cos();
        radii.push(recs[i].v_a / (psi_dot - ct).abs());
    }
    let radius_err = radii
        .iter()
        .map(|r| (r / target - 1.0).abs())
        .fold(0.0, f64::max);
    outcome(
        !switches.is_empty()
            && unfinished == 0
            && worst_rate <= k.max_deflection_rate * (1.0 + 1e-9)
            && worst_overshoot < 0.05
            && !radii.is_empty()
            && radius_err < 0.05,
        format!(
            "{} curves ({} unfinished, {} cut by end of run), max rate {:.6}/s (limit {}), max overshoot {:.4} rad (< 0.05), turn radius within {:.2}% of {:.1} m over {} samples (< 5%)",
            switches.len(),
            unfinished,
            truncated,
            worst_rate,
            k.max_deflection_rate,
            worst_overshoot,
            100.0 * radius_err,
            target,
            radii.len()
        ),
    )
}

fn telemetry_bytes(run: &Run) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut w = TelemetryWriter::new(&mut buf).expect("header");
    for r in &run.records {
        w.write(r).expect("row");
    }
    w.finish().expect("flush");
    buf
}

fn determinism_criterion(first: &Run) -> Outcome {
    let second = simulate(first.cfg.clone());
    let (a, b) = (telemetry_bytes(first), telemetry_bytes(&second));
    outcome(
        a == b && first.records.len() == second.records.len(),
        format!("{} vs {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

fn main() -> ExitCode {
    // libtest arguments such as --nocapture are accepted and ignored
    let mut results: Vec<(&str, Outcome)> = vec![
        ("loyd limit", loyd_criterion()),
        ("equilibrium suite", equilibrium_criterion()),
        ("inversion suite", inversion_criterion()),
        ("crossterm identity", crossterm_criterion()),
    ];
    let opt = run_optimizer();
    results.insert(1, ("optimizer ratio", optimizer_criterion(&opt)));
    results.insert(2, ("winch-law recovery", fit_criterion(&opt)));

    let nominal = simulate(SimConfig::nominal(10.0));
    results.push(("closed-loop autonomy", closed_loop_criterion(&nominal)));
    results.push(("controller tracking", tracking_criterion(&nominal)));
    results.push(("curve shaping", shaping_criterion(&nominal)));
    results.push(("determinism", determinism_criterion(&nominal)));

    let mut failed = 0;
    for (n, (name, o)) in results.iter().enumerate() {
        println!(
            "{} {:2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            n + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
