//! Named density families usable from JSON model files.

use std::f64::consts::PI;

use rand::{Rng, RngCore};
use rand_distr::{Beta, Cauchy, Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::SupportDescriptor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub density: DensitySpec,
}

/// A parametric density, tagged by `family` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensitySpec {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    Cauchy { location: f64, scale: f64 },
    Gamma { shape: f64, rate: f64 },
    Beta { a: f64, b: f64 },
    Mixture { components: Vec<MixtureComponent> },
    Dirichlet { alpha: Vec<f64> },
    UniformSimplex { k: usize },
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `(a - 1)·ln x` with the convention `0·ln 0 = 0`.
fn xlogy(coef: f64, x: f64) -> f64 {
    if coef == 0.0 {
        0.0
    } else {
        coef * x.ln()
    }
}

fn on_simplex(x: &[f64]) -> bool {
    x.iter().all(|v| *v >= -1e-12) && (x.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Spec(msg));
        match self {
            DensitySpec::Exponential { rate } if !(*rate > 0.0) => {
                bad(format!("exponential rate {rate} must be positive"))
            }
            DensitySpec::Normal { sd, .. } if !(*sd > 0.0) => bad(format!("normal sd {sd} must be positive")),
            DensitySpec::Uniform { low, high } if !(low < high) || !low.is_finite() || !high.is_finite() => {
                bad(format!("uniform bounds [{low}, {high}] must be finite and ordered"))
            }
            DensitySpec::Cauchy { scale, .. } if !(*scale > 0.0) => {
                bad(format!("cauchy scale {scale} must be positive"))
            }
            DensitySpec::Gamma { shape, rate } if !(*shape > 0.0 && *rate > 0.0) => {
                bad("gamma shape and rate must be positive".into())
            }
            DensitySpec::Beta { a, b } if !(*a > 0.0 && *b > 0.0) => bad("beta parameters must be positive".into()),
            DensitySpec::Dirichlet { alpha } if alpha.len() < 2 || alpha.iter().any(|a| !(*a > 0.0)) => {
                bad("dirichlet needs at least two positive concentrations".into())
            }
            DensitySpec::UniformSimplex { k } if *k < 2 => bad("simplex dimension must be at least 2".into()),
            DensitySpec::Mixture { components } => {
                if components.is_empty() {
                    return bad("mixture needs at least one component".into());
                }
                let total: f64 = components.iter().map(|c| c.weight).sum();
                if components.iter().any(|c| !(c.weight > 0.0)) || (total - 1.0).abs() > 1e-9 {
                    return bad(format!("mixture weights must be positive and sum to 1 (got {total})"));
                }
                let dim = components[0].density.dimension();
                for c in components {
                    c.density.validate()?;
                    if c.density.dimension() != dim {
                        return bad("mixture components must share a dimension".into());
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            DensitySpec::Dirichlet { alpha } => alpha.len(),
            DensitySpec::UniformSimplex { k } => *k,
            DensitySpec::Mixture { components } => components.first().map_or(1, |c| c.density.dimension()),
            _ => 1,
        }
    }

    /// Smallest support descriptor that contains the density's support.
    pub fn natural_support(&self) -> SupportDescriptor {
        match self {
            DensitySpec::Exponential { .. } | DensitySpec::Gamma { .. } => {
                SupportDescriptor::interval(0.0, f64::INFINITY)
            }
            DensitySpec::Normal { .. } | DensitySpec::Cauchy { .. } => {
                SupportDescriptor::interval(f64::NEG_INFINITY, f64::INFINITY)
            }
            DensitySpec::Uniform { low, high } => SupportDescriptor::interval(*low, *high),
            DensitySpec::Beta { .. } => SupportDescriptor::interval(0.0, 1.0),
            DensitySpec::Dirichlet { alpha } => SupportDescriptor::Simplex { k: alpha.len() },
            DensitySpec::UniformSimplex { k } => SupportDescriptor::Simplex { k: *k },
            DensitySpec::Mixture { components } => {
                let mut hull: Option<SupportDescriptor> = None;
                for c in components {
                    let s = c.density.natural_support();
                    hull = Some(match (hull, s) {
                        (None, s) => s,
                        (
                            Some(SupportDescriptor::Interval { lower: a, upper: b }),
                            SupportDescriptor::Interval { lower: c, upper: d },
                        ) => SupportDescriptor::interval(a.min(c), b.max(d)),
                        (Some(h), _) => h,
                    });
                }
                hull.unwrap_or_else(|| SupportDescriptor::interval(f64::NEG_INFINITY, f64::INFINITY))
            }
        }
    }

    pub fn ln_pdf(&self, x: &[f64]) -> f64 {
        match self {
            DensitySpec::Exponential { rate } => {
                let x = x[0];
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            DensitySpec::Normal { mean, sd } => {
                let z = (x[0] - mean) / sd;
                -0.5 * z * z - (sd * (2.0 * PI).sqrt()).ln()
            }
            DensitySpec::Uniform { low, high } => {
                if x[0] < *low || x[0] > *high {
                    f64::NEG_INFINITY
                } else {
                    -(high - low).ln()
                }
            }
            DensitySpec::Cauchy { location, scale } => {
                let z = (x[0] - location) / scale;
                -(PI * scale * (1.0 + z * z)).ln()
            }
            DensitySpec::Gamma { shape, rate } => {
                let x = x[0];
                if x < 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(*shape) + xlogy(shape - 1.0, x) - rate * x
            }
            DensitySpec::Beta { a, b } => {
                let x = x[0];
                if !(0.0..=1.0).contains(&x) {
                    return f64::NEG_INFINITY;
                }
                ln_gamma(a + b) - ln_gamma(*a) - ln_gamma(*b) + xlogy(a - 1.0, x) + xlogy(b - 1.0, 1.0 - x)
            }
            DensitySpec::Mixture { components } => {
                let terms: Vec<f64> = components.iter().map(|c| c.weight.ln() + c.density.ln_pdf(x)).collect();
                log_sum_exp(&terms)
            }
            DensitySpec::Dirichlet { alpha } => {
                if x.len() != alpha.len() || !on_simplex(x) {
                    return f64::NEG_INFINITY;
                }
                let total: f64 = alpha.iter().sum();
                let mut v = ln_gamma(total);
                for (a, xi) in alpha.iter().zip(x) {
                    v += xlogy(a - 1.0, xi.max(0.0)) - ln_gamma(*a);
                }
                v
            }
            DensitySpec::UniformSimplex { k } => {
                if x.len() != *k || !on_simplex(x) {
                    f64::NEG_INFINITY
                } else {
                    ln_gamma(*k as f64)
                }
            }
        }
    }

    /// Density evaluated directly in the linear domain where a simple
    /// closed form exists; `None` for families only available in logs.
    pub fn direct_pdf(&self, x: &[f64]) -> Option<f64> {
        match self {
            DensitySpec::Exponential { rate } => Some(if x[0] < 0.0 { 0.0 } else { rate * (-rate * x[0]).exp() }),
            DensitySpec::Normal { mean, sd } => {
                let z = (x[0] - mean) / sd;
                Some((-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt()))
            }
            DensitySpec::Uniform { low, high } => Some(if x[0] < *low || x[0] > *high {
                0.0
            } else {
                1.0 / (high - low)
            }),
            DensitySpec::Cauchy { location, scale } => {
                let z = (x[0] - location) / scale;
                Some(1.0 / (PI * scale * (1.0 + z * z)))
            }
            DensitySpec::Mixture { components } => components
                .iter()
                .map(|c| c.density.direct_pdf(x).map(|v| c.weight * v))
                .sum(),
            _ => None,
        }
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            DensitySpec::Exponential { rate } => vec![Exp::new(*rate).expect("validated").sample(rng)],
            DensitySpec::Normal { mean, sd } => vec![Normal::new(*mean, *sd).expect("validated").sample(rng)],
            DensitySpec::Uniform { low, high } => vec![rng.random_range(*low..*high)],
            DensitySpec::Cauchy { location, scale } => {
                vec![Cauchy::new(*location, *scale).expect("validated").sample(rng)]
            }
            DensitySpec::Gamma { shape, rate } => vec![Gamma::new(*shape, 1.0 / rate).expect("validated").sample(rng)],
            DensitySpec::Beta { a, b } => vec![Beta::new(*a, *b).expect("validated").sample(rng)],
            DensitySpec::Mixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        return c.density.sample(rng);
                    }
                }
                components[components.len() - 1].density.sample(rng)
            }
            DensitySpec::Dirichlet { alpha } => sample_dirichlet(alpha, rng),
            DensitySpec::UniformSimplex { k } => sample_dirichlet(&vec![1.0; *k], rng),
        }
    }
}

pub(crate) fn sample_dirichlet(alpha: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|a| Gamma::new(*a, 1.0).expect("positive concentration").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|g| g / total).collect()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadratureConfig};

    fn mass(spec: &DensitySpec, a: f64, b: f64) -> f64 {
        let cfg = QuadratureConfig::default().with_abs_tol(1e-12).with_rel_tol(1e-11);
        integrate(|x| spec.ln_pdf(&[x]).exp(), a, b, &cfg).unwrap().value
    }

    #[test]
    fn univariate_families_normalize() {
        let inf = f64::INFINITY;
        let cases = [
            (DensitySpec::Exponential { rate: 0.7 }, 0.0, inf),
            (DensitySpec::Normal { mean: 1.0, sd: 2.0 }, -inf, inf),
            (DensitySpec::Uniform { low: -1.0, high: 3.0 }, -1.0, 3.0),
            (
                DensitySpec::Cauchy {
                    location: 0.0,
                    scale: 1.0,
                },
                -inf,
                inf,
            ),
            (DensitySpec::Gamma { shape: 2.5, rate: 1.5 }, 0.0, inf),
            (DensitySpec::Beta { a: 2.0, b: 3.0 }, 0.0, 1.0),
        ];
        for (spec, a, b) in cases {
            spec.validate().unwrap();
            assert!((mass(&spec, a, b) - 1.0).abs() < 1e-9, "{spec:?}");
        }
    }

    #[test]
    fn direct_and_log_paths_agree() {
        let spec = DensitySpec::Mixture {
            components: vec![
                MixtureComponent {
                    weight: 2.0 / 3.0,
                    density: DensitySpec::Exponential { rate: 1.0 },
                },
                MixtureComponent {
                    weight: 1.0 / 3.0,
                    density: DensitySpec::Exponential { rate: 2.0 },
                },
            ],
        };
        spec.validate().unwrap();
        for x in [0.0, 0.5, 3.0, 20.0] {
            let direct = spec.direct_pdf(&[x]).unwrap();
            let expected = 2.0 / 3.0 * ((-x).exp() + (-2.0 * x).exp());
            assert!((direct - expected).abs() <= 1e-15 * expected.max(1e-300));
            assert!((spec.ln_pdf(&[x]).exp() / direct - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_matches_beta_for_two_categories() {
        let dir = DensitySpec::Dirichlet { alpha: vec![2.0, 3.0] };
        let beta = DensitySpec::Beta { a: 2.0, b: 3.0 };
        for t in [0.1, 0.4, 0.75] {
            assert!((dir.ln_pdf(&[t, 1.0 - t]) - beta.ln_pdf(&[t])).abs() < 1e-12);
        }
        assert_eq!(dir.ln_pdf(&[0.5, 0.6]), f64::NEG_INFINITY);
        let flat = DensitySpec::UniformSimplex { k: 3 };
        assert!((flat.ln_pdf(&[0.2, 0.3, 0.5]) - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(DensitySpec::Exponential { rate: 0.0 }.validate().is_err());
        assert!(DensitySpec::Uniform { low: 1.0, high: 1.0 }.validate().is_err());
        assert!(DensitySpec::Mixture { components: vec![] }.validate().is_err());
        assert!(DensitySpec::UniformSimplex { k: 1 }.validate().is_err());
    }

    #[test]
    fn json_round_trip_uses_family_tag() {
        let json = r#"{"family":"exponential","rate":0.5}"#;
        let spec: DensitySpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec, DensitySpec::Exponential { rate: 0.5 });
    }
}
