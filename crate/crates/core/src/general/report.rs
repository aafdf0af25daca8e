use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_tail_rate, RateFit};
use crate::general::{rejection_probability, tv_at_point_general, WeightCdfPair};
use crate::measures::{compute_wstar, default_budget, DiscreteModel, GeneralModel, WstarMethod};
use crate::quadrature::QuadratureConfig;

/// Tolerances tabulated in every report.
pub const DEFAULT_EPS: [f64; 4] = [0.1, 0.05, 0.01, 0.001];

/// What is known about `d(n) = sup_x ‖Pⁿ(x,·) − π‖_TV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeedKind {
    /// `w⋆` is attained: `d(n) = (1 − 1/w⋆)ⁿ`.
    ExactEquality,
    /// `w⋆` is a supremum only: `d(n) ≤ (1 − 1/w⋆)ⁿ` and, for every `ε > 0`,
    /// `d(n) ≥ (1 − 1/w⋆ − ε)ⁿ`.
    RateOnly,
    /// The weight is unbounded and the chain is not geometrically ergodic.
    NotGeometric,
}

/// Steps needed for `(1 − 1/w⋆)ⁿ ≤ ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepsToEps {
    pub eps: f64,
    /// `ln ε / ln(1 − 1/w⋆)`.
    pub fractional: f64,
    pub ceiling: u64,
}

/// Solve `rateⁿ = ε` for `n`. A zero rate reaches any `ε` in one step.
pub fn steps_to_eps(rate: f64, eps: f64) -> Result<StepsToEps> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidModel(format!("eps = {eps} is outside (0, 1)")));
    }
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidModel(format!("rate = {rate} is outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(StepsToEps {
            eps,
            fractional: 0.0,
            ceiling: 1,
        });
    }
    let fractional = eps.ln() / rate.ln();
    Ok(StepsToEps {
        eps,
        fractional,
        ceiling: fractional.ceil().max(1.0) as u64,
    })
}

/// Per-point convergence summary at one `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRate {
    pub x: f64,
    /// `R(x)`, the lower end of the sandwich.
    pub rejection: f64,
    pub fit: RateFit,
    /// `1 − 1/w⋆`, the upper end of the sandwich and the predicted limit.
    pub predicted: f64,
    /// `‖Pⁿ(x,·) − π‖_TV` for `n = 0..=n_max`.
    pub tv: Vec<f64>,
}

impl PointRate {
    pub fn rate(&self) -> f64 {
        self.fit.rate
    }

    pub fn sandwich(&self) -> (f64, f64) {
        (self.rejection, self.predicted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `None` when the weight is unbounded.
    pub wstar: Option<f64>,
    pub attained: bool,
    /// `1 − 1/w⋆`; `None` when there is no geometric rate.
    pub exact_rate: Option<f64>,
    pub speed_kind: SpeedKind,
    pub method: Option<WstarMethod>,
    pub steps_to_eps: Vec<StepsToEps>,
    pub per_point: Vec<PointRate>,
    pub warnings: Vec<String>,
}

impl RateReport {
    fn geometric(wstar: f64, attained: bool, method: Option<WstarMethod>, warnings: Vec<String>) -> Result<Self> {
        let rate = (1.0 - 1.0 / wstar).max(0.0);
        let steps = DEFAULT_EPS
            .iter()
            .map(|&e| steps_to_eps(rate, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            wstar: Some(wstar),
            attained,
            exact_rate: Some(rate),
            speed_kind: if attained {
                SpeedKind::ExactEquality
            } else {
                SpeedKind::RateOnly
            },
            method,
            steps_to_eps: steps,
            per_point: Vec::new(),
            warnings,
        })
    }

    /// Report for a finite state space, where `w⋆` is always attained.
    pub fn from_discrete(model: &DiscreteModel) -> Result<Self> {
        Self::geometric(model.wstar(), true, None, Vec::new())
    }

    /// Steps to reach `eps`; `None` for a chain with no geometric rate.
    pub fn steps(&self, eps: f64) -> Result<Option<StepsToEps>> {
        self.exact_rate.map(|r| steps_to_eps(r, eps)).transpose()
    }

    /// `(lower, upper)` envelopes for `d(n)`. For a rate-only report the
    /// lower envelope is `(1 − 1/w⋆ − slack)ⁿ` with the caller's slack.
    pub fn envelope(&self, n: usize, slack: f64) -> Option<(f64, f64)> {
        let r = self.exact_rate?;
        let upper = r.powi(n as i32);
        let lower = match self.speed_kind {
            SpeedKind::ExactEquality => upper,
            _ => (r - slack).max(0.0).powi(n as i32),
        };
        Some((lower, upper))
    }
}

/// Locate `w⋆` and classify the chain.
pub fn rate_report(model: &GeneralModel, cfg: &QuadratureConfig) -> Result<RateReport> {
    cfg.validate()?;
    match compute_wstar(model, default_budget(model.support())) {
        Ok(s) => RateReport::geometric(s.wstar, s.attained, Some(s.method), s.warnings),
        Err(Error::UnboundedWeight { threshold, near }) => Ok(RateReport {
            wstar: None,
            attained: false,
            exact_rate: None,
            speed_kind: SpeedKind::NotGeometric,
            method: None,
            steps_to_eps: Vec::new(),
            per_point: Vec::new(),
            warnings: vec![format!("w exceeds {threshold:e} near {near:?}")],
        }),
        Err(e) => Err(e),
    }
}

/// Exact TV from `x` for `n = 0..=n_max` and the fitted tail rate.
pub fn per_point_rate_general(
    model: &GeneralModel,
    pair: &WeightCdfPair,
    x: f64,
    n_max: usize,
    cfg: &QuadratureConfig,
) -> Result<PointRate> {
    if n_max < 4 {
        return Err(Error::DegenerateFit(format!(
            "n_max = {n_max} is too short to fit a rate"
        )));
    }
    let rejection = rejection_probability(model, &[x], cfg)?.value;
    let tv = (0..=n_max)
        .map(|n| tv_at_point_general(model, pair, n, x, cfg))
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<f64> = tv
        .iter()
        .map(|t| if *t > 0.0 { t.ln() } else { f64::NEG_INFINITY })
        .collect();
    let fit = fit_tail_rate(&logs)?;
    Ok(PointRate {
        x,
        rejection,
        fit,
        predicted: (1.0 - 1.0 / pair.wstar()).max(0.0),
        tv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_step_counts() {
        for (theta, expect) in [(0.5, 6.64), (0.1, 43.71), (0.01, 458.21)] {
            let s = steps_to_eps(1.0 - theta, 0.01).unwrap();
            assert!((s.fractional - expect).abs() < 0.005, "{theta}: {}", s.fractional);
            assert_eq!(s.ceiling, expect.ceil() as u64);
        }
    }

    #[test]
    fn steps_positive_and_rejects_bad_eps() {
        assert!(steps_to_eps(0.3, 0.5).unwrap().fractional > 0.0);
        assert!(steps_to_eps(0.3, 1.0).is_err());
        assert!(steps_to_eps(1.0, 0.1).is_err());
        assert_eq!(steps_to_eps(0.0, 0.1).unwrap().ceiling, 1);
    }

    fn exponential(theta: f64) -> GeneralModel {
        GeneralModel::from_specs(
            "exponential",
            crate::measures::DensitySpec::Exponential { rate: 1.0 },
            crate::measures::DensitySpec::Exponential { rate: theta },
            None,
        )
        .unwrap()
    }

    #[test]
    fn exponential_report_flows_through_wstar() {
        let cfg = QuadratureConfig::default();
        for (theta, expect) in [(0.5, 6.64), (0.1, 43.71), (0.01, 458.21)] {
            let r = rate_report(&exponential(theta), &cfg).unwrap();
            assert_eq!(r.speed_kind, SpeedKind::ExactEquality);
            let s = r.steps(0.01).unwrap().unwrap();
            assert!((s.fractional - expect).abs() < 0.01);
        }
    }

    #[test]
    fn unbounded_weight_is_not_geometric() {
        let r = rate_report(&exponential(1.5), &QuadratureConfig::default()).unwrap();
        assert_eq!(r.speed_kind, SpeedKind::NotGeometric);
        assert!(r.exact_rate.is_none() && r.steps(0.1).unwrap().is_none());
    }

    #[test]
    fn per_point_rates_approach_the_global_rate() {
        let cfg = QuadratureConfig::default();
        let m = exponential(0.5);
        let pair = crate::general::weight_cdf_pair(&m, &cfg).unwrap();
        let at_mode = per_point_rate_general(&m, &pair, 0.0, 60, &cfg).unwrap();
        assert!((at_mode.rate() - 0.5).abs() < 1e-8);
        for x in [1.0, 3.0] {
            let p = per_point_rate_general(&m, &pair, x, 60, &cfg).unwrap();
            let (lo, hi) = p.sandwich();
            assert!(lo <= p.rate() + 1e-9 && p.rate() <= hi + 1e-9, "x={x}: {}", p.rate());
            assert!((p.rate() - 0.5).abs() < 2e-2, "x={x}: {}", p.rate());
        }
    }

    #[test]
    fn identical_densities_rate_zero() {
        let cfg = QuadratureConfig::default();
        let m = exponential(1.0);
        let pair = crate::general::weight_cdf_pair(&m, &cfg).unwrap();
        let p = per_point_rate_general(&m, &pair, 2.0, 10, &cfg).unwrap();
        assert_eq!(p.rate(), 0.0);
    }

    #[test]
    fn discrete_report_is_exact() {
        let m = DiscreteModel::new(vec![0.5, 0.25, 0.25], vec![0.25, 0.25, 0.5]).unwrap();
        let r = RateReport::from_discrete(&m).unwrap();
        assert_eq!(r.speed_kind, SpeedKind::ExactEquality);
        assert_eq!(r.exact_rate, Some(0.5));
        assert_eq!(r.envelope(3, 0.1), Some((0.125, 0.125)));
    }
}
