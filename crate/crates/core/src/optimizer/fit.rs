//! Least-squares fit of a saturated linear winch law to `l_dot / v_w`
//! against elevation.

use serde::{Deserialize, Serialize};

use super::{CycleSample, OptimalCycle};
use crate::error::{KiteError, Result};

/// Fewest samples a fit is attempted with.
pub const MIN_FIT_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinchLawFit {
    /// Elevation where the fitted speed crosses zero (rad).
    pub theta0: f64,
    /// Slope of the single-line fit, `d(l_dot / v_w) / d theta`.
    pub slope: f64,
    /// Slopes through the pivot from the samples on either side.
    pub slope_lower: f64,
    pub slope_upper: f64,
    pub samples: usize,
}

/// Fit `y = slope (theta - theta0)` to the given points.
pub fn fit_winch_law_samples(theta: &[f64], y: &[f64]) -> Result<WinchLawFit> {
    let n = theta.len().min(y.len());
    if n < MIN_FIT_SAMPLES {
        return Err(KiteError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: n,
        });
    }
    let mean_x = theta[..n].iter().sum::<f64>() / n as f64;
    let mean_y = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = theta[i] - mean_x;
        sxx += dx * dx;
        sxy += dx * (y[i] - mean_y);
    }
    if sxx <= 0.0 || sxy == 0.0 {
        return Err(KiteError::InsufficientSamples {
            needed: MIN_FIT_SAMPLES,
            got: 0,
        });
    }
    let slope = sxy / sxx;
    let theta0 = mean_x - mean_y / slope;

    let side = |lower: bool| {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            let dx = theta[i] - theta0;
            if (dx <= 0.0) == lower {
                num += dx * y[i];
                den += dx * dx;
            }
        }
        if den > 0.0 {
            num / den
        } else {
            slope
        }
    };
    Ok(WinchLawFit {
        theta0,
        slope,
        slope_lower: side(true),
        slope_upper: side(false),
        samples: n,
    })
}

/// Select the samples around the reel-out to reel-in switch along which
/// the elevation rises, drop those pinned at the extreme speeds, and fit.
pub fn select_transfer_branch(samples: &[CycleSample], v_w: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let switch = (1..n).find(|&i| samples[i - 1].l_dot > 0.0 && samples[i].l_dot <= 0.0);
    let Some(switch) = switch else {
        return (Vec::new(), Vec::new());
    };
    let mut lo = switch;
    while lo > 0 && samples[lo - 1].theta < samples[lo].theta {
        lo -= 1;
    }
    let mut hi = switch;
    while hi + 1 < n && samples[hi + 1].theta > samples[hi].theta {
        hi += 1;
    }
    let y_max = samples.iter().map(|s| s.l_dot).fold(f64::MIN, f64::max);
    let y_min = samples.iter().map(|s| s.l_dot).fold(f64::MAX, f64::min);
    let pinned = |v: f64| {
        let tol = 1e-9 * (1.0 + v.abs());
        (v - y_max).abs() < tol || (v - y_min).abs() < tol
    };
    samples[lo..=hi]
        .iter()
        .filter(|s| !pinned(s.l_dot))
        .map(|s| (s.theta, s.l_dot / v_w))
        .unzip()
}

pub fn fit_winch_law(cycle: &OptimalCycle) -> Result<WinchLawFit> {
    let (theta, y) = select_transfer_branch(&cycle.samples, cycle.v_w);
    fit_winch_law_samples(&theta, &y)
}
