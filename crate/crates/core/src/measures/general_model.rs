use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::DensitySpec;
use crate::quadrature::{integrate, QuadratureConfig};

/// A function of a point in the state space.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Draws one point given a caller-owned RNG.
pub type Sampler = Arc<dyn Fn(&mut dyn RngCore) -> Vec<f64> + Send + Sync>;

/// Where a continuous model lives. Infinite interval ends serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "SupportRepr", into = "SupportRepr")]
pub enum SupportDescriptor {
    Interval { lower: f64, upper: f64 },
    Simplex { k: usize },
    Product { intervals: Vec<(f64, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SupportRepr {
    Interval { lower: Option<f64>, upper: Option<f64> },
    Simplex { k: usize },
    Product { intervals: Vec<(Option<f64>, Option<f64>)> },
}

fn to_bound(v: Option<f64>, fallback: f64) -> f64 {
    v.unwrap_or(fallback)
}

fn from_bound(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl From<SupportRepr> for SupportDescriptor {
    fn from(r: SupportRepr) -> Self {
        match r {
            SupportRepr::Interval { lower, upper } => SupportDescriptor::Interval {
                lower: to_bound(lower, f64::NEG_INFINITY),
                upper: to_bound(upper, f64::INFINITY),
            },
            SupportRepr::Simplex { k } => SupportDescriptor::Simplex { k },
            SupportRepr::Product { intervals } => SupportDescriptor::Product {
                intervals: intervals
                    .into_iter()
                    .map(|(a, b)| (to_bound(a, f64::NEG_INFINITY), to_bound(b, f64::INFINITY)))
                    .collect(),
            },
        }
    }
}

impl From<SupportDescriptor> for SupportRepr {
    fn from(s: SupportDescriptor) -> Self {
        match s {
            SupportDescriptor::Interval { lower, upper } => SupportRepr::Interval {
                lower: from_bound(lower),
                upper: from_bound(upper),
            },
            SupportDescriptor::Simplex { k } => SupportRepr::Simplex { k },
            SupportDescriptor::Product { intervals } => SupportRepr::Product {
                intervals: intervals
                    .into_iter()
                    .map(|(a, b)| (from_bound(a), from_bound(b)))
                    .collect(),
            },
        }
    }
}

impl SupportDescriptor {
    pub fn interval(lower: f64, upper: f64) -> Self {
        SupportDescriptor::Interval { lower, upper }
    }

    pub fn dimension(&self) -> usize {
        match self {
            SupportDescriptor::Interval { .. } => 1,
            SupportDescriptor::Simplex { k } => *k,
            SupportDescriptor::Product { intervals } => intervals.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |a: f64, b: f64| !a.is_nan() && !b.is_nan() && a < b;
        match self {
            SupportDescriptor::Interval { lower, upper } if !ordered(*lower, *upper) => Err(Error::InvalidModel(
                format!("interval [{lower}, {upper}] is not ordered"),
            )),
            SupportDescriptor::Simplex { k } if *k < 2 => {
                Err(Error::InvalidModel(format!("simplex dimension {k} must be at least 2")))
            }
            SupportDescriptor::Product { intervals } => {
                if intervals.is_empty() {
                    return Err(Error::InvalidModel(
                        "product support needs at least one interval".into(),
                    ));
                }
                match intervals.iter().find(|(a, b)| !ordered(*a, *b)) {
                    Some((a, b)) => Err(Error::InvalidModel(format!("interval [{a}, {b}] is not ordered"))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dimension() || x.iter().any(|v| v.is_nan()) {
            return false;
        }
        match self {
            SupportDescriptor::Interval { lower, upper } => *lower <= x[0] && x[0] <= *upper,
            SupportDescriptor::Simplex { .. } => {
                x.iter().all(|v| *v >= -1e-12) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-9
            }
            SupportDescriptor::Product { intervals } => intervals.iter().zip(x).all(|((a, b), v)| a <= v && v <= b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monotone {
    Increasing,
    Decreasing,
    None,
}

/// Facts about the weight function supplied by whoever built the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StructureHints {
    pub weight_monotone: Option<Monotone>,
    pub known_argmax: Option<Vec<f64>>,
    pub known_wstar: Option<f64>,
    pub wstar_attained: Option<bool>,
}

/// A continuous IMH instance: target π, independent proposal p, and a
/// sampler for p.
#[derive(Clone)]
pub struct GeneralModel {
    name: String,
    target_log: PointFn,
    target_pdf: Option<PointFn>,
    proposal_log: PointFn,
    proposal_pdf: Option<PointFn>,
    proposal_sampler: Sampler,
    target_sampler: Option<Sampler>,
    support: SupportDescriptor,
    hints: StructureHints,
}

impl fmt::Debug for GeneralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralModel")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("hints", &self.hints)
            .finish_non_exhaustive()
    }
}

impl GeneralModel {
    pub fn new(
        name: impl Into<String>,
        target_log: PointFn,
        proposal_log: PointFn,
        proposal_sampler: Sampler,
        support: SupportDescriptor,
    ) -> Result<Self> {
        support.validate()?;
        Ok(Self {
            name: name.into(),
            target_log,
            target_pdf: None,
            proposal_log,
            proposal_pdf: None,
            proposal_sampler,
            target_sampler: None,
            support,
            hints: StructureHints::default(),
        })
    }

    /// Build from two registry densities. The support defaults to the
    /// proposal's natural support.
    pub fn from_specs(
        name: impl Into<String>,
        target: DensitySpec,
        proposal: DensitySpec,
        support: Option<SupportDescriptor>,
    ) -> Result<Self> {
        target.validate()?;
        proposal.validate()?;
        if target.dimension() != proposal.dimension() {
            return Err(Error::InvalidModel(format!(
                "target has dimension {}, proposal has dimension {}",
                target.dimension(),
                proposal.dimension()
            )));
        }
        let support = support.unwrap_or_else(|| proposal.natural_support());
        if support.dimension() != target.dimension() {
            return Err(Error::InvalidModel(
                "support dimension does not match the densities".into(),
            ));
        }
        let (t, p) = (Arc::new(target), Arc::new(proposal));
        let mut model = Self::new(
            name,
            {
                let t = t.clone();
                Arc::new(move |x: &[f64]| t.ln_pdf(x))
            },
            {
                let p = p.clone();
                Arc::new(move |x: &[f64]| p.ln_pdf(x))
            },
            {
                let p = p.clone();
                Arc::new(move |rng: &mut dyn RngCore| p.sample(rng))
            },
            support,
        )?;
        if t.direct_pdf(&vec![0.0; t.dimension()]).is_some() {
            let t2 = t.clone();
            model.target_pdf = Some(Arc::new(move |x: &[f64]| t2.direct_pdf(x).unwrap_or(0.0)));
        }
        if p.direct_pdf(&vec![0.0; p.dimension()]).is_some() {
            let p2 = p.clone();
            model.proposal_pdf = Some(Arc::new(move |x: &[f64]| p2.direct_pdf(x).unwrap_or(0.0)));
        }
        model.target_sampler = Some(Arc::new(move |rng: &mut dyn RngCore| t.sample(rng)));
        Ok(model)
    }

    pub fn with_target_pdf(mut self, f: PointFn) -> Self {
        self.target_pdf = Some(f);
        self
    }

    pub fn with_proposal_pdf(mut self, f: PointFn) -> Self {
        self.proposal_pdf = Some(f);
        self
    }

    pub fn with_target_sampler(mut self, s: Sampler) -> Self {
        self.target_sampler = Some(s);
        self
    }

    /// Attach hints, checking that a known maximizer reproduces a known
    /// supremum.
    pub fn with_hints(mut self, hints: StructureHints) -> Result<Self> {
        if let Some(w) = hints.known_wstar {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidModel(format!(
                    "known_wstar = {w} must be positive and finite"
                )));
            }
        }
        if let Some(x) = &hints.known_argmax {
            let w_at = self.weight_at(x)?;
            if let Some(w) = hints.known_wstar {
                if (w_at - w).abs() > 1e-9 * w.max(1.0) {
                    return Err(Error::InvalidModel(format!(
                        "known_argmax has weight {w_at}, but known_wstar is {w}"
                    )));
                }
            }
        }
        self.hints = hints;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &SupportDescriptor {
        &self.support
    }

    pub fn hints(&self) -> &StructureHints {
        &self.hints
    }

    pub fn dimension(&self) -> usize {
        self.support.dimension()
    }

    pub fn target_log_density(&self, x: &[f64]) -> f64 {
        (self.target_log)(x)
    }

    pub fn proposal_log_density(&self, x: &[f64]) -> f64 {
        (self.proposal_log)(x)
    }

    pub fn target_density(&self, x: &[f64]) -> f64 {
        match &self.target_pdf {
            Some(f) => f(x),
            None => self.target_log_density(x).exp(),
        }
    }

    pub fn proposal_density(&self, x: &[f64]) -> f64 {
        match &self.proposal_pdf {
            Some(f) => f(x),
            None => self.proposal_log_density(x).exp(),
        }
    }

    pub fn sample_proposal(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (self.proposal_sampler)(rng)
    }

    pub fn sample_target(&self, rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.target_sampler.as_ref().map(|s| s(rng))
    }

    pub fn has_target_sampler(&self) -> bool {
        self.target_sampler.is_some()
    }

    /// `ln w(x)`; `-inf` where the target vanishes.
    pub fn log_weight(&self, x: &[f64]) -> Result<f64> {
        if !self.support.contains(x) {
            return Err(Error::PointOutsideSupport(x.to_vec()));
        }
        let lp = self.proposal_log_density(x);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return Err(Error::ZeroProposalDensity(x.to_vec()));
        }
        let lt = self.target_log_density(x);
        if lt.is_nan() {
            return Err(Error::InvalidModel(format!("target log density is NaN at {x:?}")));
        }
        Ok(lt - lp)
    }

    pub fn weight_at(&self, x: &[f64]) -> Result<f64> {
        self.log_weight(x).map(f64::exp)
    }

    /// Like [`GeneralModel::weight_at`] for 1-D models, with points outside
    /// the support or where both densities vanish mapped to 0.
    pub(crate) fn weight_or_zero(&self, x: f64) -> f64 {
        match self.log_weight(&[x]) {
            Ok(l) => l.exp(),
            Err(Error::ZeroProposalDensity(_)) if self.target_log_density(&[x]) == f64::NEG_INFINITY => 0.0,
            Err(Error::ZeroProposalDensity(_)) => f64::INFINITY,
            Err(_) => 0.0,
        }
    }

    /// Interval ends for 1-D models.
    pub fn bounds_1d(&self) -> Option<(f64, f64)> {
        match self.support {
            SupportDescriptor::Interval { lower, upper } => Some((lower, upper)),
            SupportDescriptor::Product { ref intervals } if intervals.len() == 1 => Some(intervals[0]),
            _ => None,
        }
    }

    /// Check that both densities of a 1-D model integrate to 1 within
    /// `tol`, and spot-check support containment on a grid.
    pub fn check_normalization(&self, tol: f64) -> Result<()> {
        let Some((a, b)) = self.bounds_1d() else {
            return Ok(());
        };
        let cfg = QuadratureConfig::default()
            .with_abs_tol(tol * 1e-2)
            .with_rel_tol(tol * 1e-2);
        let masses = [
            ("target", integrate(|x| self.target_density(&[x]), a, b, &cfg)?.value),
            (
                "proposal",
                integrate(|x| self.proposal_density(&[x]), a, b, &cfg)?.value,
            ),
        ];
        for (name, mass) in masses {
            if (mass - 1.0).abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "{name} density integrates to {mass}, not 1"
                )));
            }
        }
        let lo = if a.is_finite() { a } else { -50.0 };
        let hi = if b.is_finite() { b } else { lo.max(0.0) + 50.0 };
        for i in 0..=200 {
            let x = lo + (hi - lo) * i as f64 / 200.0;
            if self.target_density(&[x]) > 0.0 && self.proposal_density(&[x]) <= 0.0 {
                return Err(Error::ZeroProposalDensity(vec![x]));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exponential(theta: f64) -> GeneralModel {
        GeneralModel::from_specs(
            "exp",
            DensitySpec::Exponential { rate: 1.0 },
            DensitySpec::Exponential { rate: theta },
            None,
        )
        .unwrap()
    }

    #[test]
    fn weight_of_exponential_pair() {
        let m = exponential(0.5);
        assert!((m.weight_at(&[0.0]).unwrap() - 2.0).abs() < 1e-15);
        assert!((m.weight_at(&[2.0 * 2f64.ln()]).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(m.weight_at(&[-1.0]), Err(Error::PointOutsideSupport(_))));
    }

    #[test]
    fn identical_densities_have_unit_weight() {
        let m = exponential(1.0);
        for x in [0.0, 0.3, 7.0, 40.0] {
            assert!((m.weight_at(&[x]).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn support_json_uses_null_for_infinite_ends() {
        let s = SupportDescriptor::interval(0.0, f64::INFINITY);
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"interval","lower":0.0,"upper":null}"#);
        let back: SupportDescriptor = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn hints_must_be_consistent() {
        let m = exponential(0.5);
        let good = StructureHints {
            known_argmax: Some(vec![0.0]),
            known_wstar: Some(2.0),
            ..Default::default()
        };
        assert!(m.clone().with_hints(good).is_ok());
        let bad = StructureHints {
            known_argmax: Some(vec![0.0]),
            known_wstar: Some(2.1),
            ..Default::default()
        };
        assert!(m.with_hints(bad).is_err());
    }

    #[test]
    fn normalization_check() {
        exponential(0.3).check_normalization(1e-6).unwrap();
        let bad = GeneralModel::from_specs(
            "bad",
            DensitySpec::Exponential { rate: 1.0 },
            DensitySpec::Uniform { low: 0.0, high: 1.0 },
            Some(SupportDescriptor::interval(0.0, f64::INFINITY)),
        )
        .unwrap();
        assert!(bad.check_normalization(1e-6).is_err());
    }
}
