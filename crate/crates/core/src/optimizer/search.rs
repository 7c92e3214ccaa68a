//! Spectral projected gradient ascent over the normalized decision vector.
//!
//! Gradients are central differences; the `2n` perturbed evaluations are
//! independent and go through [`par_map`]. Step acceptance is sequential,
//! so the result does not depend on the thread count.

use super::{evaluate, simulate_from, CycleDecision, OptimalCycle, OptimizerConfig};
use crate::error::{check, Result};
use crate::model::{KiteParams, WindCondition};
use crate::parallel::par_map;

/// Smallest reel speed magnitude allowed at interior nodes, relative to
/// `v_w`; keeps the segment durations finite.
const MIN_REEL: f64 = 0.005;
const NONMONOTONE_MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;

/// Layout `[reel_out (M-1), reel_in (M-1), psi (2M)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    pub values: Vec<f64>,
    m: usize,
}

impl DecisionVector {
    pub fn new(reel_out: &[f64], reel_in: &[f64], psi: &[f64]) -> Self {
        let mut values = Vec::with_capacity(reel_out.len() + reel_in.len() + psi.len());
        values.extend_from_slice(reel_out);
        values.extend_from_slice(reel_in);
        values.extend_from_slice(psi);
        Self {
            values,
            m: reel_out.len() + 1,
        }
    }

    pub fn reel_out(&self) -> &[f64] {
        &self.values[..self.m - 1]
    }

    pub fn reel_in(&self) -> &[f64] {
        &self.values[self.m - 1..2 * self.m - 2]
    }

    pub fn psi(&self) -> &[f64] {
        &self.values[2 * self.m - 2..]
    }

    fn bounds(&self, cfg: &OptimizerConfig) -> Vec<(f64, f64)> {
        let c = &cfg.constraints;
        let mut b = vec![(MIN_REEL, c.alpha_limit_out); self.m - 1];
        b.extend(vec![(c.alpha_limit_in, -MIN_REEL); self.m - 1]);
        b.extend(vec![(0.0, c.psi_max); 2 * self.m]);
        b
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, m: self.m }
    }

    pub fn decision(&self, cfg: &OptimizerConfig, v_w: f64) -> Result<CycleDecision> {
        CycleDecision::from_normalized(
            self.reel_out(),
            self.reel_in(),
            self.psi(),
            &cfg.constraints,
            v_w,
        )
    }
}

/// Starting point: Loyd-like reel-out in crosswind, fast reel-in with the
/// kite steered up.
pub fn seed_decision(cfg: &OptimizerConfig) -> DecisionVector {
    let m = cfg.nodes_per_phase;
    let c = &cfg.constraints;
    let reel_out = vec![0.2_f64.min(c.alpha_limit_out); m - 1];
    let reel_in = vec![(0.8 * c.alpha_limit_in).min(-MIN_REEL); m - 1];
    let psi: Vec<f64> = (0..2 * m)
        .map(|i| if i > 0 && i < m { 0.8 * c.psi_max } else { 0.0 })
        .collect();
    DecisionVector::new(&reel_out, &reel_in, &psi)
}

fn project(x: &[f64], bounds: &[(f64, f64)]) -> Vec<f64> {
    x.iter()
        .zip(bounds)
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect()
}

struct Problem<'a> {
    cfg: &'a OptimizerConfig,
    wind: &'a WindCondition,
    params: &'a KiteParams,
    template: DecisionVector,
}

impl Problem<'_> {
    fn value(&self, x: &[f64], guess: f64) -> Option<(f64, f64)> {
        let d = self
            .template
            .with_values(x.to_vec())
            .decision(self.cfg, self.wind.v_w)
            .ok()?;
        evaluate(&d, self.cfg, self.wind, self.params, guess).ok()
    }

    fn gradient(&self, x: &[f64], f0: f64, guess: f64) -> Vec<f64> {
        let h = self.cfg.fd_step;
        let probes: Vec<(usize, f64)> = (0..x.len()).flat_map(|i| [(i, h), (i, -h)]).collect();
        let values = par_map(&probes, |&(i, step)| {
            let mut p = x.to_vec();
            p[i] += step;
            self.value(&p, guess).map(|v| v.0)
        });
        (0..x.len())
            .map(|i| match (values[2 * i], values[2 * i + 1]) {
                (Some(a), Some(b)) => (a - b) / (2.0 * h),
                (Some(a), None) => (a - f0) / h,
                (None, Some(b)) => (f0 - b) / h,
                (None, None) => 0.0,
            })
            .collect()
    }
}

/// Maximize the average cycle power from `seed`. Returns the best point
/// found; `converged` is false if the iteration limit was hit first.
pub fn optimize_cycle(
    cfg: &OptimizerConfig,
    wind: &WindCondition,
    params: &KiteParams,
    seed: &DecisionVector,
) -> Result<OptimalCycle> {
    cfg.validate()?;
    wind.validate()?;
    let problem = Problem {
        cfg,
        wind,
        params,
        template: seed.clone(),
    };
    let bounds = seed.bounds(cfg);
    let mut x = project(&seed.values, &bounds);
    let (mut f, mut theta0) =
        problem
            .value(&x, 1.0)
            .ok_or_else(|| crate::error::KiteError::InvalidParameter {
                name: "seed",
                reason: "seed decision is not feasible".into(),
            })?;
    check(
        f.is_finite(),
        "seed",
        "seed decision gives a non-finite power",
    )?;

    let mut g = problem.gradient(&x, f, theta0);
    let mut lambda = 1.0;
    let mut history = vec![f];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + lambda * gi).collect();
        let d: Vec<f64> = project(&trial, &bounds)
            .iter()
            .zip(&x)
            .map(|(p, xi)| p - xi)
            .collect();
        let step_norm = d.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if step_norm < cfg.tolerance {
            converged = true;
            break;
        }
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let reference = history.iter().copied().fold(f64::INFINITY, f64::min);

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((fc, th)) = problem.value(&cand, theta0) {
                if fc >= reference + ARMIJO * alpha * slope {
                    accepted = Some((cand, fc, th));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, f_new, th_new)) = accepted else {
            break;
        };

        let g_new = problem.gradient(&x_new, f_new, th_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        // curvature of -f along s
        let sy: f64 = s
            .iter()
            .zip(g_new.iter().zip(&g))
            .map(|(si, (gn, go))| -si * (gn - go))
            .sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        lambda = if sy > 0.0 {
            (ss / sy).clamp(1e-8, 1e4)
        } else {
            1e4
        };

        x = x_new;
        f = f_new;
        theta0 = th_new;
        g = g_new;
        history.push(f);
        if history.len() > NONMONOTONE_MEMORY {
            history.remove(0);
        }
    }

    let decision = seed.with_values(x).decision(cfg, wind.v_w)?;
    let mut cycle = simulate_from(&decision, cfg, wind, params, theta0)?;
    cycle.iterations = iterations;
    cycle.converged = converged;
    Ok(cycle)
}
