//! Worked examples with analytic ground truth, addressable by name.
//!
//! Each truth carries a provenance tag: `Reported` values are published
//! figures that the generic modules must reproduce, `Derived` values come
//! with the derivation stated next to them, `Trivial` ones follow from the
//! definitions.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discrete::TransitionMatrix;
use crate::error::{Error, Result};
use crate::measures::{ln_gamma, DensitySpec, DiscreteModel, GeneralModel, MixtureComponent, Monotone, StructureHints};
use crate::quadrature::{integrate_with_breaks, QuadratureConfig};
use rand::Rng;

use crate::samplers::{run_mh, ChainRun, Proposal, UniformWalk};

pub const REGISTRY_NAMES: [&str; 8] = [
    "exponential",
    "dirichlet_multinomial",
    "rate_not_attained",
    "cauchy_rwmh",
    "uniform_rwmh",
    "sharpness_phi1",
    "sharpness_phi2",
    "three_point",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Reported,
    Derived,
    Trivial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub name: String,
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

fn truth(name: &str, value: f64, provenance: Provenance, note: &str) -> Truth {
    Truth {
        name: name.into(),
        value,
        provenance,
        note: note.into(),
    }
}

/// The three-state chain with rows `(⅓, ⅓, ⅓)`, `(⅓, ⅔, 0)`, `(⅓, 0, ⅔)`
/// and uniform stationary law. From state 0 it mixes in one step; from
/// state 1 the TV is `½(⅔)ⁿ`.
pub fn three_point_chain() -> TransitionMatrix {
    let t = 1.0 / 3.0;
    TransitionMatrix::from_rows(&[vec![t, t, t], vec![t, 2.0 * t, 0.0], vec![t, 0.0, 2.0 * t]])
        .expect("stochastic rows")
}

/// π = Exp(1), p = Exp(θ): `w(x) = e^{−(1−θ)x}/θ`, decreasing, `w⋆ = 1/θ`
/// at `x = 0`.
pub fn exponential_exponential(theta: f64) -> Result<GeneralModel> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    GeneralModel::from_specs(
        "exponential",
        DensitySpec::Exponential { rate: 1.0 },
        DensitySpec::Exponential { rate: theta },
        None,
    )?
    .with_hints(StructureHints {
        weight_monotone: Some(Monotone::Decreasing),
        known_argmax: Some(vec![0.0]),
        known_wstar: None,
        wstar_attained: Some(true),
    })
}

/// Posterior Dirichlet(α + x) against the uniform proposal on the simplex.
#[derive(Debug, Clone)]
pub struct DirichletCase {
    pub model: GeneralModel,
    pub argmax: Vec<f64>,
    /// Closed-form `w⋆` in the log-gamma domain.
    pub wstar: f64,
}

fn check_dirichlet(alpha: &[f64], counts: &[f64]) -> Result<()> {
    if alpha.len() != counts.len() || alpha.len() < 2 {
        return Err(Error::Spec(format!(
            "alpha has {} entries and counts {}; need the same K >= 2",
            alpha.len(),
            counts.len()
        )));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0)) {
        return Err(Error::Spec(format!("alpha entry {a} must be positive")));
    }
    if let Some(c) = counts.iter().find(|c| !(**c >= 0.0 && c.fract() == 0.0)) {
        return Err(Error::Spec(format!("count {c} must be a nonnegative integer")));
    }
    for (i, (a, c)) in alpha.iter().zip(counts).enumerate() {
        if a + c < 1.0 {
            return Err(Error::ModeUndefined { index: i, value: a + c });
        }
    }
    Ok(())
}

/// Posterior mode `θ⋆ᵢ = (xᵢ + αᵢ − 1)/(N + α − K)`; the centroid when the
/// posterior is flat.
pub fn dirichlet_argmax(alpha: &[f64], counts: &[f64]) -> Result<Vec<f64>> {
    check_dirichlet(alpha, counts)?;
    let k = alpha.len() as f64;
    let denom: f64 = alpha.iter().zip(counts).map(|(a, c)| a + c - 1.0).sum();
    if denom == 0.0 {
        return Ok(vec![1.0 / k; alpha.len()]);
    }
    Ok(alpha.iter().zip(counts).map(|(a, c)| (a + c - 1.0) / denom).collect())
}

/// `ln w⋆ = ln Γ(N + α) − ln (K−1)! − Σ ln Γ(xᵢ + αᵢ)
///        + Σ (xᵢ+αᵢ−1) ln(xᵢ+αᵢ−1) − (N+α−K) ln(N+α−K)`, with `0 ln 0 = 0`.
pub fn dirichlet_log_wstar(alpha: &[f64], counts: &[f64]) -> Result<f64> {
    check_dirichlet(alpha, counts)?;
    let k = alpha.len();
    let xlogx = |v: f64| if v == 0.0 { 0.0 } else { v * v.ln() };
    let total: f64 = alpha.iter().zip(counts).map(|(a, c)| a + c).sum();
    let mut lw = ln_gamma(total) - ln_gamma(k as f64);
    for (a, c) in alpha.iter().zip(counts) {
        lw += xlogx(a + c - 1.0) - ln_gamma(a + c);
    }
    Ok(lw - xlogx(total - k as f64))
}

/// Large-`N` approximation `w⋆ ≈ √(N^{K−1} / ((2π)^{K−1} Π pᵢ)) / (K−1)!`.
pub fn dirichlet_stirling_wstar(n: f64, p: &[f64]) -> f64 {
    let k = p.len() as f64;
    let prod: f64 = p.iter().product();
    (n.powf(k - 1.0) / ((2.0 * PI).powf(k - 1.0) * prod)).sqrt() / ln_gamma(k).exp()
}

pub fn dirichlet_multinomial(alpha: &[f64], counts: &[f64]) -> Result<DirichletCase> {
    let argmax = dirichlet_argmax(alpha, counts)?;
    let wstar = dirichlet_log_wstar(alpha, counts)?.exp();
    let posterior: Vec<f64> = alpha.iter().zip(counts).map(|(a, c)| a + c).collect();
    let model = GeneralModel::from_specs(
        "dirichlet_multinomial",
        DensitySpec::Dirichlet { alpha: posterior },
        DensitySpec::UniformSimplex { k: alpha.len() },
        None,
    )?
    .with_hints(StructureHints {
        known_argmax: Some(argmax.clone()),
        wstar_attained: Some(true),
        ..StructureHints::default()
    })?;
    Ok(DirichletCase { model, argmax, wstar })
}

/// π = Exp(1) and p = ⅔Exp(1) + ⅓Exp(2), so `p(x) = ⅔e^{−x}(1 + e^{−x})`
/// and `w(x) = (3/2)/(1 + e^{−x})`: strictly increasing, `w(0) = 3/4`,
/// supremum `3/2` approached only as `x → ∞`.
pub fn rate_not_attained_model() -> Result<GeneralModel> {
    GeneralModel::from_specs(
        "rate_not_attained",
        DensitySpec::Exponential { rate: 1.0 },
        DensitySpec::Mixture {
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
        },
        None,
    )?
    .with_hints(StructureHints {
        weight_monotone: Some(Monotone::Increasing),
        ..StructureHints::default()
    })
}

/// Random-walk Metropolis with a `U[x − δ, x + δ]` proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwmhFixture {
    pub name: String,
    pub target: DensitySpec,
    pub half_width: f64,
}

impl RwmhFixture {
    pub fn target_log(&self, x: f64) -> f64 {
        self.target.ln_pdf(&[x])
    }

    pub fn proposal(&self) -> UniformWalk {
        UniformWalk {
            half_width: self.half_width,
        }
    }

    /// `R(x) = 1 − (1/2δ) ∫_{x−δ}^{x+δ} min(1, π(y)/π(x)) dy`.
    pub fn rejection_probability(&self, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let lx = self.target_log(x);
        if lx == f64::NEG_INFINITY {
            return Err(Error::ZeroDensityAtStart(vec![x]));
        }
        let d = self.half_width;
        let f = |y: f64| (self.target_log(y) - lx).min(0.0).exp();
        // kinks where π(y) = π(x) for symmetric unimodal targets, and the
        // support ends of a uniform target
        let mut breaks = vec![x - d, x + d, -x.abs(), x.abs()];
        if let DensitySpec::Uniform { low, high } = self.target {
            breaks.extend([low, high]);
        }
        breaks.retain(|b| *b >= x - d && *b <= x + d);
        breaks.sort_by(f64::total_cmp);
        let acc = integrate_with_breaks(f, &breaks, cfg)?.value / (2.0 * d);
        Ok((1.0 - acc).clamp(0.0, 1.0))
    }

    /// `π(|X| > n)` by quadrature.
    pub fn tail_mass(&self, n: f64, cfg: &QuadratureConfig) -> Result<f64> {
        let f = |y: f64| self.target_log(y).exp();
        let right = integrate_with_breaks(f, &[n, f64::INFINITY], cfg)?.value;
        let left = integrate_with_breaks(f, &[f64::NEG_INFINITY, -n], cfg)?.value;
        Ok(right + left)
    }

    /// Fraction of `draws` fresh proposals from `x` that are rejected, with
    /// its standard error.
    pub fn empirical_rejection(&self, x: f64, draws: usize, seed: u64) -> Result<(f64, f64)> {
        let lx = self.target_log(x);
        if lx == f64::NEG_INFINITY {
            return Err(Error::ZeroDensityAtStart(vec![x]));
        }
        let q = self.proposal();
        let mut rng = crate::rng::stream(seed, 0);
        let mut rejected = 0usize;
        for _ in 0..draws {
            let y = Proposal::sample(&q, x, &mut rng);
            let a = (self.target_log(y) - lx).min(0.0).exp();
            if rng.random::<f64>() >= a {
                rejected += 1;
            }
        }
        let f = rejected as f64 / draws as f64;
        Ok((f, (f * (1.0 - f) / draws as f64).sqrt()))
    }

    pub fn simulate(&self, x0: f64, steps: usize, seed: u64) -> Result<ChainRun<f64>> {
        run_mh(&|x| self.target_log(x), &self.proposal(), x0, steps, seed, &self.name)
    }
}

/// Cauchy target with a `U[x − 1, x + 1]` proposal: every step moves at most
/// 1, so `‖Pⁿ(x₀,·) − π‖_TV ≥ π(|x| > |x₀| + n) ≥ 1/(2π(|x₀| + n))` and the
/// chain is not geometrically ergodic even though `sup R < 1`.
pub fn cauchy_rwmh() -> RwmhFixture {
    RwmhFixture {
        name: "cauchy_rwmh".into(),
        target: DensitySpec::Cauchy {
            location: 0.0,
            scale: 1.0,
        },
        half_width: 1.0,
    }
}

/// `1/(2π(|x₀| + n))`.
pub fn cauchy_tail_bound(x0: f64, n: f64) -> f64 {
    1.0 / (2.0 * PI * (x0.abs() + n))
}

/// U[−1, 1] target with a `U[x − δ, x + δ]` proposal, `1 ≤ δ < 2`.
pub fn uniform_rwmh(delta: f64) -> Result<RwmhFixture> {
    if !(1.0..2.0).contains(&delta) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(RwmhFixture {
        name: "uniform_rwmh".into(),
        target: DensitySpec::Uniform { low: -1.0, high: 1.0 },
        half_width: delta,
    })
}

/// `R(y) = (δ − 1 + |y|)/(2δ)` for `|y| > δ − 1` and `1 − 1/δ` inside.
pub fn uniform_rwmh_rejection(delta: f64, y: f64) -> f64 {
    if y.abs() > delta - 1.0 {
        (delta - 1.0 + y.abs()) / (2.0 * delta)
    } else {
        1.0 - 1.0 / delta
    }
}

/// Φ₁: uniform target on the first `K` of `2K` states, uniform proposal on
/// all of them. Φ₂: `π₁ = ½, πᵢ = 1/(2K)`, `p₁ = ¼, pᵢ = 3/(4K)` on
/// `K + 1` states. Both have `w⋆ = 2`.
pub fn sharpness_chains(k: usize) -> Result<(DiscreteModel, DiscreteModel)> {
    if k < 2 {
        return Err(Error::InvalidModel(format!("sharpness chains need K >= 2, got {k}")));
    }
    let kf = k as f64;
    let mut t1 = vec![1.0 / kf; k];
    t1.extend(vec![0.0; k]);
    let phi1 = DiscreteModel::normalized(t1, vec![1.0; 2 * k])?;
    let mut t2 = vec![0.5];
    t2.extend(vec![0.5 / kf; k]);
    let mut p2 = vec![0.25];
    p2.extend(vec![0.75 / kf; k]);
    let phi2 = DiscreteModel::normalized(t2, p2)?;
    Ok((phi1, phi2))
}

/// A registry model, by kind.
#[derive(Debug, Clone)]
pub enum CaseModel {
    Discrete(DiscreteModel),
    General(GeneralModel),
    /// A finite chain given by its matrix, with its stationary law.
    Chain {
        kernel: TransitionMatrix,
        stationary: Vec<f64>,
    },
    Rwmh(RwmhFixture),
}

#[derive(Debug, Clone)]
pub struct RegistryEntry {
    pub name: String,
    pub params: BTreeMap<String, String>,
    pub model: CaseModel,
    pub truths: Vec<Truth>,
}

impl RegistryEntry {
    pub fn truth(&self, name: &str) -> Option<f64> {
        self.truths.iter().find(|t| t.name == name).map(|t| t.value)
    }
}

struct Params<'a> {
    name: &'a str,
    map: &'a BTreeMap<String, String>,
    allowed: &'a [&'a str],
}

impl<'a> Params<'a> {
    fn new(name: &'a str, map: &'a BTreeMap<String, String>, allowed: &'a [&'a str]) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Spec(format!(
                "{name} takes no parameter `{k}` (allowed: {})",
                if allowed.is_empty() {
                    "none".to_string()
                } else {
                    allowed.join(", ")
                }
            )));
        }
        Ok(Self { name, map, allowed })
    }

    fn number(&self, key: &str, default: f64) -> Result<f64> {
        debug_assert!(self.allowed.contains(&key));
        match self.map.get(key) {
            None => Ok(default),
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Spec(format!("{}: `{key}` = `{s}` is not a number", self.name))),
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Spec(format!("{}: `{key}` entry `{v}` is not a number", self.name)))
                })
                .collect(),
        }
    }

    fn size(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.number(key, default as f64)?;
        if v.fract() != 0.0 || v < 0.0 {
            return Err(Error::Spec(format!(
                "{}: `{key}` must be a nonnegative integer",
                self.name
            )));
        }
        Ok(v as usize)
    }
}

/// Build a registry model with its truths. Unknown names and parameters are
/// specification errors.
pub fn build(name: &str, params: &BTreeMap<String, String>) -> Result<RegistryEntry> {
    use Provenance::*;
    let (model, truths) = match name {
        "exponential" => {
            let p = Params::new(name, params, &["theta"])?;
            let theta = p.number("theta", 0.5)?;
            let model = exponential_exponential(theta)?;
            let rate = 1.0 - theta;
            let mut truths = vec![
                truth("wstar", 1.0 / theta, Derived, "w(0) = 1/theta and w is decreasing"),
                truth("rate", rate, Reported, "d(n) = (1 - theta)^n"),
            ];
            let reported = [(0.5, 6.64), (0.1, 43.71), (0.01, 458.21)];
            if let Some((_, n)) = reported.iter().find(|(t, _)| (*t - theta).abs() < 1e-15) {
                truths.push(truth(
                    "steps_to_eps_0.01",
                    *n,
                    Reported,
                    "two-decimal steps for eps = 0.01",
                ));
            } else if theta < 1.0 {
                truths.push(truth(
                    "steps_to_eps_0.01",
                    0.01f64.ln() / rate.ln(),
                    Derived,
                    "ln(0.01)/ln(1 - theta)",
                ));
            }
            (CaseModel::General(model), truths)
        }
        "dirichlet_multinomial" => {
            let p = Params::new(name, params, &["alpha", "counts"])?;
            let alpha = p.list("alpha", &[1.0, 1.0])?;
            let counts = p.list("counts", &[1.0, 1.0])?;
            let case = dirichlet_multinomial(&alpha, &counts)?;
            let truths = vec![
                truth(
                    "wstar",
                    case.wstar,
                    Derived,
                    "posterior density at its mode over the uniform simplex density (K-1)!",
                ),
                truth("rate", 1.0 - 1.0 / case.wstar, Derived, "1 - 1/w*"),
            ];
            (CaseModel::General(case.model), truths)
        }
        "rate_not_attained" => {
            Params::new(name, params, &[])?;
            let truths = vec![
                truth("wstar", 1.5, Derived, "w(x) = 1.5/(1 + e^-x) tends to 1.5 as x grows"),
                truth("rate", 1.0 / 3.0, Derived, "1 - 1/1.5"),
                truth("w_at_0", 0.75, Derived, "1.5/(1 + 1)"),
            ];
            (CaseModel::General(rate_not_attained_model()?), truths)
        }
        "cauchy_rwmh" => {
            Params::new(name, params, &[])?;
            let truths = vec![
                truth(
                    "rejection_at_0",
                    1.0 - PI / 4.0,
                    Derived,
                    "1 - (1/2) * integral over [-1, 1] of 1/(1 + s^2) = 1 - pi/4",
                ),
                truth(
                    "tail_bound_10",
                    cauchy_tail_bound(0.0, 10.0),
                    Reported,
                    "1/(2 pi (|x0| + n)) at x0 = 0, n = 10",
                ),
            ];
            (CaseModel::Rwmh(cauchy_rwmh()), truths)
        }
        "uniform_rwmh" => {
            let p = Params::new(name, params, &["delta"])?;
            let delta = p.number("delta", 1.5)?;
            let fixture = uniform_rwmh(delta)?;
            let truths = vec![
                truth(
                    "rejection_at_1",
                    uniform_rwmh_rejection(delta, 1.0),
                    Reported,
                    "(delta - 1 + |y|)/(2 delta)",
                ),
                truth(
                    "inner_rate",
                    1.0 - 1.0 / delta,
                    Trivial,
                    "1 - 1/delta inside [1 - delta, delta - 1]",
                ),
            ];
            (CaseModel::Rwmh(fixture), truths)
        }
        "sharpness_phi1" | "sharpness_phi2" => {
            let p = Params::new(name, params, &["k"])?;
            let k = p.size("k", 4)?;
            let (phi1, phi2) = sharpness_chains(k)?;
            let model = if name == "sharpness_phi1" { phi1 } else { phi2 };
            let truths = vec![
                truth("wstar", 2.0, Derived, "largest ratio of target to proposal mass"),
                truth("rate", 0.5, Reported, "1 - 1/w*"),
                truth(
                    "d_max_prefactor",
                    if name == "sharpness_phi1" { 1.0 } else { 0.5 },
                    Reported,
                    "d(t) = prefactor * 0.5^t for t >= 1",
                ),
            ];
            (CaseModel::Discrete(model), truths)
        }
        "three_point" => {
            Params::new(name, params, &[])?;
            let truths = vec![
                truth("tv_from_0_t1", 0.0, Reported, "mixes after one step"),
                truth("tv_from_1_t3", 4.0 / 27.0, Reported, "(1/2)(2/3)^3"),
            ];
            (
                CaseModel::Chain {
                    kernel: three_point_chain(),
                    stationary: vec![1.0 / 3.0; 3],
                },
                truths,
            )
        }
        other => {
            return Err(Error::Spec(format!(
                "unknown registry model `{other}` (known: {})",
                REGISTRY_NAMES.join(", ")
            )))
        }
    };
    Ok(RegistryEntry {
        name: name.to_string(),
        params: params.clone(),
        model,
        truths,
    })
}
