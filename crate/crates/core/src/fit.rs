//! Least-squares decay-rate fits on log distances.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Result of fitting `log d(t) ≈ a + t·log r` over a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub rate: f64,
    pub log_slope: f64,
    pub window: (usize, usize),
}

/// Fit the geometric decay rate of `log_values[t]` (natural logs, `-inf`
/// for an exact zero) over the tail window `[horizon/2, horizon]`.
///
/// A sequence that is identically zero after `t = 0` has rate 0 by
/// convention. If the sequence hits an exact zero inside the window the
/// window is shortened to the last half of the nonzero prefix.
pub fn fit_tail_rate(log_values: &[f64]) -> Result<RateFit> {
    if log_values.len() < 3 {
        return Err(Error::DegenerateFit("need at least three points".into()));
    }
    let horizon = log_values.len() - 1;
    if log_values[1..].iter().all(|v| *v == f64::NEG_INFINITY) {
        return Ok(RateFit {
            rate: 0.0,
            log_slope: f64::NEG_INFINITY,
            window: (1, horizon),
        });
    }
    let last = log_values
        .iter()
        .position(|v| !v.is_finite())
        .map(|p| p - 1)
        .unwrap_or(horizon);
    let (lo, hi) = if last >= horizon {
        (horizon / 2, horizon)
    } else {
        (last / 2, last)
    };
    if hi < lo + 2 {
        return Err(Error::DegenerateFit(format!(
            "distance vanishes at t = {}, leaving fewer than three points",
            last + 1
        )));
    }
    let log_slope = slope(lo, &log_values[lo..=hi]);
    Ok(RateFit {
        rate: log_slope.exp(),
        log_slope,
        window: (lo, hi),
    })
}

fn slope(first: usize, ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let xs = (0..ys.len()).map(|i| (first + i) as f64);
    let mx = xs.clone().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}
