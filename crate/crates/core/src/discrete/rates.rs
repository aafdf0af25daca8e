use serde::{Deserialize, Serialize};

use crate::discrete::{build_kernel, exact_tv, liu_spectrum, TvTrajectory};
use crate::error::{Error, Result};
use crate::fit::{fit_tail_rate, RateFit};
use crate::measures::DiscreteModel;

const SANDWICH_SLACK: f64 = 1e-12;

/// `d_max(t)` against `(1−π₁)(1−1/w⋆)^t ≤ d_max(t) ≤ (1−1/w⋆)^t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rate: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub trajectory: TvTrajectory,
}

pub fn rate_bounds_discrete(model: &DiscreteModel, horizon: usize) -> Result<SandwichReport> {
    let trajectory = exact_tv(&build_kernel(model), model.target(), horizon)?;
    let rate = 1.0 - 1.0 / model.wstar();
    let pi1 = model.target()[0];
    let upper: Vec<f64> = (0..=horizon).map(|t| rate.powi(t as i32)).collect();
    let lower: Vec<f64> = upper.iter().map(|u| (1.0 - pi1) * u).collect();
    for t in 0..=horizon {
        let d = trajectory.d_max[t];
        if d < lower[t] - SANDWICH_SLACK || d > upper[t] + SANDWICH_SLACK {
            return Err(Error::SandwichViolated {
                t,
                value: d,
                lower: lower[t],
                upper: upper[t],
            });
        }
    }
    Ok(SandwichReport {
        rate,
        lower,
        upper,
        trajectory,
    })
}

/// Fitted decay rate from one start state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRate {
    /// Canonical index.
    pub state: usize,
    /// Position in the model's input vectors.
    pub user_state: usize,
    pub fit: RateFit,
    /// `|f₁(x)|`, when the closed-form spectrum exists.
    pub c_pi: Option<f64>,
    /// Whether `TV ≥ (π⋆/2)‖P^t(x,·)/π − 1‖_{2,π} ≥ (π⋆ c(π)/2)(1−1/w⋆)^t`
    /// held at every `t`; `None` without a spectrum.
    pub spectral_chain_holds: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteRates {
    pub theoretical: f64,
    pub states: Vec<StateRate>,
    pub notes: Vec<String>,
}

/// Fit `log TV(x, t)` over `t ∈ [T/2, T]` for every start state and check
/// the spectral lower-bound chain along the way.
pub fn per_point_rate_discrete(model: &DiscreteModel, horizon: usize) -> Result<DiscreteRates> {
    if horizon < 20 {
        return Err(Error::DegenerateFit(format!(
            "horizon {horizon} is below the minimum of 20"
        )));
    }
    let traj = exact_tv(&build_kernel(model), model.target(), horizon)?;
    let theoretical = 1.0 - 1.0 / model.wstar();
    let mut notes = Vec::new();
    let spectrum = match liu_spectrum(model) {
        Ok(s) => Some(s),
        Err(Error::ZeroWeightState(i)) => {
            notes.push(format!(
                "state {i} has zero weight; spectral lower bound skipped, rates from exact TV only"
            ));
            None
        }
        Err(e) => return Err(e),
    };
    let pi_min = model.min_target();
    let log_half_pimin = (0.5 * pi_min).ln();
    let mut states = Vec::with_capacity(model.len());
    for x in 0..model.len() {
        let fit = fit_tail_rate(&traj.log_per_state[x])?;
        let (c_pi, chain) = match &spectrum {
            Some(s) => {
                let c = s.f(1, x).abs();
                let holds = (0..=horizon).all(|t| {
                    let log_tv = traj.log_per_state[x][t];
                    let mid = log_half_pimin + s.log_l2_deviation(x, t);
                    let low = log_half_pimin + c.ln() + t as f64 * theoretical.ln();
                    let slack = 1e-9;
                    (log_tv >= mid - slack || mid == f64::NEG_INFINITY)
                        && (mid >= low - slack || low == f64::NEG_INFINITY)
                });
                (Some(c), Some(holds))
            }
            None => (None, None),
        };
        states.push(StateRate {
            state: x,
            user_state: model.user_index(x),
            fit,
            c_pi,
            spectral_chain_holds: chain,
        });
    }
    Ok(DiscreteRates {
        theoretical,
        states,
        notes,
    })
}
