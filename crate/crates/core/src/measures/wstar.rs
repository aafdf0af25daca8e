use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{sample_dirichlet, DiscreteModel, GeneralModel, Monotone, SupportDescriptor};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng;

/// Weights growing past this toward a support boundary are declared unbounded.
pub const UNBOUNDED_WEIGHT_THRESHOLD: f64 = 1e8;

const TAIL_MASS: f64 = 1e-10;
const ARG_TOL: f64 = 1e-10;
const SEARCH_SEED: u64 = 0x5eed_0fa5_ca1e;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WstarMethod {
    AnalyticHint,
    GridRefine,
    MonteCarloSup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub wstar: f64,
    pub argmax: Option<Vec<f64>>,
    /// Input position of the maximizing state, for discrete models.
    pub argmax_state: Option<usize>,
    pub attained: bool,
    pub method: WstarMethod,
    pub warnings: Vec<String>,
}

impl WeightSummary {
    fn point(wstar: f64, argmax: Option<Vec<f64>>, attained: bool, method: WstarMethod) -> Self {
        Self {
            wstar,
            argmax,
            argmax_state: None,
            attained,
            method,
            warnings: Vec::new(),
        }
    }
}

/// Evaluation budget used when the caller has no preference.
pub fn default_budget(support: &SupportDescriptor) -> usize {
    match support {
        SupportDescriptor::Interval { .. } => 10_001,
        SupportDescriptor::Product { intervals } if intervals.len() == 1 => 10_001,
        SupportDescriptor::Simplex { k: 2 } => 10_001,
        _ => 200_000,
    }
}

pub fn wstar_discrete(model: &DiscreteModel) -> WeightSummary {
    WeightSummary {
        wstar: model.wstar(),
        argmax: None,
        argmax_state: Some(model.user_index(0)),
        attained: true,
        method: WstarMethod::AnalyticHint,
        warnings: Vec::new(),
    }
}

/// Locate `w⋆ = sup w` for a continuous model.
///
/// Hints are trusted when present. Otherwise 1-D models get a grid scan
/// over the support (infinite ends truncated where the proposal tail mass
/// drops to 1e-10) refined by golden-section search, and simplex models
/// a grid (K = 2) or deterministic random search plus compass refinement.
pub fn compute_wstar(model: &GeneralModel, budget: usize) -> Result<WeightSummary> {
    if budget < 100 {
        return Err(Error::BudgetExhausted(format!(
            "budget {budget} is below the minimum of 100 evaluations"
        )));
    }
    let hints = model.hints();
    if hints.known_wstar.is_some() || hints.known_argmax.is_some() {
        let argmax = hints.known_argmax.clone();
        let wstar = match (hints.known_wstar, &argmax) {
            (Some(w), _) => w,
            (None, Some(x)) => model.weight_at(x)?,
            (None, None) => unreachable!(),
        };
        let attained = hints.wstar_attained.unwrap_or(argmax.is_some());
        return Ok(finish(WeightSummary::point(
            wstar,
            argmax,
            attained,
            WstarMethod::AnalyticHint,
        )));
    }
    let summary = match model.support() {
        SupportDescriptor::Simplex { k: 2 } => search_simplex2(model, budget)?,
        SupportDescriptor::Simplex { k } => search_random(model, budget, *k, true)?,
        SupportDescriptor::Product { intervals } if intervals.len() > 1 => {
            search_random(model, budget, intervals.len(), false)?
        }
        _ => {
            let (a, b) = model.bounds_1d().expect("1-D support");
            search_interval(model, a, b, budget)?
        }
    };
    Ok(finish(summary))
}

fn finish(mut s: WeightSummary) -> WeightSummary {
    if s.wstar < 1.0 - 1e-6 {
        s.warnings.push(format!(
            "w* = {} is below 1; the densities may not be normalized on the support",
            s.wstar
        ));
    }
    s
}

/// `ln w` at a point, with `+inf` for a target mass the proposal misses and
/// `-inf` where the weight is undefined or zero.
pub(crate) fn log_weight_or_limit(model: &GeneralModel, x: &[f64]) -> f64 {
    match model.log_weight(x) {
        Ok(v) => v,
        Err(Error::ZeroProposalDensity(_)) if model.target_log_density(x) > f64::NEG_INFINITY => f64::INFINITY,
        Err(_) => f64::NEG_INFINITY,
    }
}

fn unbounded(near: Vec<f64>) -> Error {
    Error::UnboundedWeight {
        threshold: UNBOUNDED_WEIGHT_THRESHOLD,
        near,
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo <= ARG_TOL * lo.abs().max(hi.abs()).max(1.0) {
            break;
        }
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Point where the proposal tail beyond it (in direction `dir`) has mass
/// `TAIL_MASS`, searched from `start`.
fn tail_quantile(model: &GeneralModel, start: f64, dir: f64) -> Option<f64> {
    let cfg = QuadratureConfig::default().with_abs_tol(1e-14).with_rel_tol(1e-6);
    let tail = |x: f64| {
        let f = |y: f64| model.proposal_density(&[y]);
        let r = if dir > 0.0 {
            integrate(f, x, f64::INFINITY, &cfg)
        } else {
            integrate(f, f64::NEG_INFINITY, x, &cfg)
        };
        r.ok().map(|i| i.value)
    };
    let mut step = 1.0;
    let mut inner = start;
    let mut outer = start + dir * step;
    loop {
        if tail(outer)? <= TAIL_MASS {
            break;
        }
        inner = outer;
        step *= 2.0;
        outer = start + dir * step;
        if step > 1e300 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (inner + outer);
        if (outer - inner).abs() <= 1e-6 * mid.abs().max(1.0) {
            break;
        }
        if tail(mid)? <= TAIL_MASS {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    Some(outer)
}

/// Monotone map from a uniform grid parameter to a possibly wide interval,
/// dense near the finite end (or the center) and sparse in the tails.
pub(crate) struct GridMap {
    kind: MapKind,
    u0: f64,
    u1: f64,
}

enum MapKind {
    Linear,
    Right(f64),
    Left(f64),
    Both(f64),
}

impl GridMap {
    pub(crate) fn new(a: f64, b: f64, lo: f64, hi: f64) -> Self {
        let inv_rat = |s: f64| s / (1.0 + s);
        let inv_odd = |s: f64| {
            if s == 0.0 {
                0.0
            } else {
                (-1.0 + (1.0 + 4.0 * s * s).sqrt()) / (2.0 * s)
            }
        };
        match (a.is_finite(), b.is_finite()) {
            (true, true) => GridMap {
                kind: MapKind::Linear,
                u0: a,
                u1: b,
            },
            (true, false) => GridMap {
                kind: MapKind::Right(a),
                u0: 0.0,
                u1: inv_rat(hi - a),
            },
            (false, true) => GridMap {
                kind: MapKind::Left(b),
                u0: 0.0,
                u1: inv_rat(b - lo),
            },
            (false, false) => {
                let c = 0.5 * (lo + hi);
                GridMap {
                    kind: MapKind::Both(c),
                    u0: inv_odd(lo - c),
                    u1: inv_odd(hi - c),
                }
            }
        }
    }

    pub(crate) fn at(&self, i: usize, n: usize) -> f64 {
        let u = self.u0 + (self.u1 - self.u0) * i as f64 / (n - 1) as f64;
        match self.kind {
            MapKind::Linear => u,
            MapKind::Right(a) => a + u / (1.0 - u),
            MapKind::Left(b) => b - (self.u1 - u + self.u0) / (1.0 - (self.u1 - u + self.u0)),
            MapKind::Both(c) => c + u / (1.0 - u * u),
        }
    }
}

/// Finite search range for a 1-D support: infinite ends are replaced by
/// the points where the proposal tail mass drops to `TAIL_MASS`.
pub(crate) fn truncated_bounds(model: &GeneralModel, a: f64, b: f64, warnings: &mut Vec<String>) -> (f64, f64) {
    let finite_start = if a.is_finite() {
        a
    } else if b.is_finite() {
        b
    } else {
        0.0
    };
    let mut truncate = |end: f64, dir: f64| -> f64 {
        if end.is_finite() {
            return end;
        }
        tail_quantile(model, finite_start, dir).unwrap_or_else(|| {
            warnings.push("proposal tail quantile not found; truncating at distance 50".into());
            finite_start + 50.0 * dir
        })
    };
    (truncate(a, -1.0), truncate(b, 1.0))
}

fn search_interval(model: &GeneralModel, a: f64, b: f64, budget: usize) -> Result<WeightSummary> {
    let lw = |x: f64| log_weight_or_limit(model, &[x]);
    let mut warnings = Vec::new();
    let (lo, hi) = truncated_bounds(model, a, b, &mut warnings);

    if let Some(m @ (Monotone::Increasing | Monotone::Decreasing)) = model.hints().weight_monotone {
        let (edge, cut, dir) = if m == Monotone::Decreasing {
            (a, lo, -1.0)
        } else {
            (b, hi, 1.0)
        };
        if edge.is_finite() {
            let v = lw(edge);
            if v == f64::INFINITY {
                return Err(unbounded(vec![edge]));
            }
            return Ok(WeightSummary::point(
                v.exp(),
                Some(vec![edge]),
                true,
                WstarMethod::AnalyticHint,
            ));
        }
        let mut s = probe_outward(model, cut, dir)?;
        s.method = WstarMethod::AnalyticHint;
        s.warnings.extend(warnings);
        return Ok(s);
    }

    let n = budget;
    let map = GridMap::new(a, b, lo, hi);
    let xs: Vec<f64> = (0..n).map(|i| map.at(i, n)).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| lw(x)).collect();
    if let Some(i) = vals.iter().position(|v| *v == f64::INFINITY) {
        return Err(unbounded(vec![xs[i]]));
    }
    let best = best_index(&vals);
    let at_lower_cut = best == 0 && !a.is_finite();
    let at_upper_cut = best == n - 1 && !b.is_finite();
    if at_lower_cut || at_upper_cut {
        let dir = if at_lower_cut { -1.0 } else { 1.0 };
        let mut s = probe_outward(model, xs[best], dir)?;
        s.warnings
            .insert(0, format!("grid maximum at the truncation boundary x = {}", xs[best]));
        s.warnings.extend(warnings);
        return Ok(s);
    }
    let l = xs[best.saturating_sub(1)];
    let r = xs[(best + 1).min(n - 1)];
    let (x_ref, v_ref) = golden_max(lw, l, r);
    let (x, v) = if v_ref >= vals[best] {
        (x_ref, v_ref)
    } else {
        (xs[best], vals[best])
    };
    let mut s = WeightSummary::point(v.exp(), Some(vec![x]), true, WstarMethod::GridRefine);
    s.warnings = warnings;
    Ok(s)
}

/// Index of the largest value, preferring an interior index among ties.
fn best_index(vals: &[f64]) -> usize {
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tie = |v: f64| v >= m - 1e-14 * m.abs().max(1.0);
    let n = vals.len();
    (1..n - 1)
        .find(|&i| tie(vals[i]))
        .unwrap_or(if tie(vals[0]) { 0 } else { n - 1 })
}

/// Follow the weight outward from `start` by doubling steps. A drop means
/// the supremum is a maximum beyond the truncation; growth past the
/// threshold means the weight is unbounded; a weight that keeps rising
/// (or plateaus) until the proposal density underflows is a supremum that
/// is approached but not attained.
fn probe_outward(model: &GeneralModel, start: f64, dir: f64) -> Result<WeightSummary> {
    let lw = |x: f64| log_weight_or_limit(model, &[x]);
    let limit = UNBOUNDED_WEIGHT_THRESHOLD.ln();
    let mut step = start.abs().max(1.0) * 0.25;
    let (mut before, mut prev_x, mut prev) = (start, start, lw(start));
    if prev > limit {
        return Err(unbounded(vec![start]));
    }
    for _ in 0..2000 {
        let x = prev_x + dir * step;
        step *= 2.0;
        if !x.is_finite() {
            break;
        }
        let v = lw(x);
        if v > limit {
            return Err(unbounded(vec![x]));
        }
        if v < prev - 1e-9 {
            let (lo, hi) = if before < x { (before, x) } else { (x, before) };
            let (xr, vr) = golden_max(lw, lo, hi);
            let (xm, vm) = if vr >= prev { (xr, vr) } else { (prev_x, prev) };
            let mut s = WeightSummary::point(vm.exp(), Some(vec![xm]), true, WstarMethod::GridRefine);
            s.warnings.push("maximum lies beyond the proposal truncation".into());
            return Ok(s);
        }
        before = prev_x;
        prev_x = x;
        prev = prev.max(v);
        if model.proposal_log_density(&[x]) < -700.0 {
            break;
        }
    }
    let mut s = WeightSummary::point(prev.exp(), None, false, WstarMethod::GridRefine);
    s.warnings.push(format!(
        "weight still nondecreasing at x = {prev_x}; supremum approached toward the boundary, treated as not attained"
    ));
    Ok(s)
}

fn search_simplex2(model: &GeneralModel, budget: usize) -> Result<WeightSummary> {
    let lw = |t: f64| log_weight_or_limit(model, &[t, 1.0 - t]);
    let n = budget;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| lw(t)).collect();
    let best = best_index(&vals);
    if vals[best] > UNBOUNDED_WEIGHT_THRESHOLD.ln() && (best == 0 || best == n - 1) {
        return Err(unbounded(vec![ts[best], 1.0 - ts[best]]));
    }
    let (tr, vr) = golden_max(lw, ts[best.saturating_sub(1)], ts[(best + 1).min(n - 1)]);
    let (t, v) = if vr >= vals[best] {
        (tr, vr)
    } else {
        (ts[best], vals[best])
    };
    Ok(WeightSummary::point(
        v.exp(),
        Some(vec![t, 1.0 - t]),
        true,
        WstarMethod::GridRefine,
    ))
}

/// Random search (uniform on the simplex, or proposal draws for boxes)
/// followed by a compass search that shifts mass between coordinates.
fn search_random(model: &GeneralModel, budget: usize, k: usize, simplex: bool) -> Result<WeightSummary> {
    let lw = |x: &[f64]| log_weight_or_limit(model, x);
    let mut rng = rng::stream(SEARCH_SEED, 0);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..budget {
        let x = if simplex {
            sample_dirichlet(&vec![1.0; k], &mut rng)
        } else {
            model.sample_proposal(&mut rng)
        };
        let v = lw(&x);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    let (mut x, mut v) = best.expect("budget is positive");
    let mut step = 0.05;
    while step > ARG_TOL {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let mut y = x.clone();
                y[i] += step;
                if simplex {
                    y[j] -= step;
                    if y[j] < 0.0 {
                        continue;
                    }
                } else if j != (i + 1) % k {
                    continue;
                }
                let vy = lw(&y);
                if vy > v {
                    x = y;
                    v = vy;
                    improved = true;
                }
                if !simplex {
                    let mut z = x.clone();
                    z[i] -= step;
                    let vz = lw(&z);
                    if vz > v {
                        x = z;
                        v = vz;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if v > UNBOUNDED_WEIGHT_THRESHOLD.ln() && x.iter().any(|c| *c < 1e-6) {
        return Err(unbounded(x));
    }
    Ok(WeightSummary::point(v.exp(), Some(x), true, WstarMethod::MonteCarloSup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DensitySpec, MixtureComponent, StructureHints};
    use proptest::prelude::*;

    fn exponential(theta: f64) -> GeneralModel {
        GeneralModel::from_specs(
            "exp",
            DensitySpec::Exponential { rate: 1.0 },
            DensitySpec::Exponential { rate: theta },
            None,
        )
        .unwrap()
    }

    fn not_attained() -> GeneralModel {
        let mix = DensitySpec::Mixture {
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
        GeneralModel::from_specs("na", DensitySpec::Exponential { rate: 1.0 }, mix, None).unwrap()
    }

    #[test]
    fn exponential_grid_search_finds_left_endpoint() {
        let s = compute_wstar(&exponential(0.5), 10_001).unwrap();
        assert!((s.wstar - 2.0).abs() < 1e-12);
        assert!(s.argmax.unwrap()[0].abs() < 1e-9);
        assert!(s.attained);
        assert_eq!(s.method, WstarMethod::GridRefine);
    }

    #[test]
    fn decreasing_hint_returns_left_endpoint() {
        let m = exponential(0.25)
            .with_hints(StructureHints {
                weight_monotone: Some(Monotone::Decreasing),
                ..Default::default()
            })
            .unwrap();
        let s = compute_wstar(&m, 100).unwrap();
        assert_eq!(s.argmax, Some(vec![0.0]));
        assert!((s.wstar - 4.0).abs() < 1e-12);
    }

    #[test]
    fn identical_densities_give_one() {
        let s = compute_wstar(&exponential(1.0), 1000).unwrap();
        assert!((s.wstar - 1.0).abs() < 1e-12);
        assert!(s.attained);
        let normal = GeneralModel::from_specs(
            "n",
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            None,
        )
        .unwrap();
        let s = compute_wstar(&normal, 1000).unwrap();
        assert!((s.wstar - 1.0).abs() < 1e-12);
        assert!(s.attained);
    }

    #[test]
    fn normal_pair_interior_maximum() {
        // N(0,1) against N(0,2²): w(x) = 2 exp(-3x²/8), maximal at 0.
        let m = GeneralModel::from_specs(
            "n",
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            DensitySpec::Normal { mean: 0.0, sd: 2.0 },
            None,
        )
        .unwrap();
        let s = compute_wstar(&m, 1001).unwrap();
        assert!((s.wstar - 2.0).abs() < 1e-12);
        assert!(s.argmax.unwrap()[0].abs() < 1e-6);
    }

    #[test]
    fn supremum_at_infinity_is_not_attained() {
        let s = compute_wstar(&not_attained(), 10_001).unwrap();
        assert!((s.wstar - 1.5).abs() < 1e-9, "{}", s.wstar);
        assert!(!s.attained);
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn unbounded_weight_is_detected() {
        let m = exponential(1.5);
        assert!(matches!(compute_wstar(&m, 1000), Err(Error::UnboundedWeight { .. })));
    }

    #[test]
    fn beta_posterior_on_two_simplex() {
        let m = GeneralModel::from_specs(
            "dm",
            DensitySpec::Dirichlet { alpha: vec![2.0, 2.0] },
            DensitySpec::UniformSimplex { k: 2 },
            None,
        )
        .unwrap();
        let s = compute_wstar(&m, 10_001).unwrap();
        assert!((s.wstar - 1.5).abs() < 1e-12);
        assert!((s.argmax.unwrap()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn three_simplex_random_search() {
        // Dirichlet(2,2,2) over uniform: mode at the centroid,
        // w⋆ = Γ(6)/Γ(2)³ · (1/3)³ / 2! = 120/27/2.
        let m = GeneralModel::from_specs(
            "dm3",
            DensitySpec::Dirichlet { alpha: vec![2.0; 3] },
            DensitySpec::UniformSimplex { k: 3 },
            None,
        )
        .unwrap();
        let s = compute_wstar(&m, 20_000).unwrap();
        assert!((s.wstar - 120.0 / 54.0).abs() < 1e-9, "{}", s.wstar);
        assert_eq!(s.method, WstarMethod::MonteCarloSup);
    }

    #[test]
    fn small_budget_is_rejected() {
        assert!(matches!(
            compute_wstar(&exponential(0.5), 99),
            Err(Error::BudgetExhausted(_))
        ));
    }

    #[test]
    fn discrete_summary() {
        let m = DiscreteModel::new(vec![0.5, 0.25, 0.25], vec![0.25, 0.5, 0.25]).unwrap();
        let s = wstar_discrete(&m);
        assert_eq!(s.wstar, 2.0);
        assert_eq!(s.argmax_state, Some(0));
        let m = DiscreteModel::new(vec![0.5, 0.5, 0.0, 0.0], vec![0.25; 4]).unwrap();
        assert_eq!(wstar_discrete(&m).wstar, 2.0);
        assert_eq!(wstar_discrete(&m).argmax_state, Some(0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn wstar_monotone_in_budget(b1 in 100usize..3000, extra in 0usize..3000) {
            let m = GeneralModel::from_specs(
                "g",
                DensitySpec::Gamma { shape: 3.0, rate: 1.0 },
                DensitySpec::Exponential { rate: 0.4 },
                None,
            )
            .unwrap();
            let lo = compute_wstar(&m, b1).unwrap().wstar;
            let hi = compute_wstar(&m, b1 + extra).unwrap().wstar;
            prop_assert!(hi >= lo * (1.0 - 1e-13), "{} < {}", hi, lo);
        }

        #[test]
        fn wstar_at_least_one(rate in 0.05f64..1.0, mean in -2.0f64..2.0) {
            let m = GeneralModel::from_specs(
                "e",
                DensitySpec::Exponential { rate: 1.0 },
                DensitySpec::Exponential { rate },
                None,
            )
            .unwrap();
            prop_assert!(compute_wstar(&m, 500).unwrap().wstar >= 1.0 - 1e-9);
            let n = GeneralModel::from_specs(
                "n",
                DensitySpec::Normal { mean, sd: 1.0 },
                DensitySpec::Cauchy { location: 0.0, scale: 1.0 },
                None,
            )
            .unwrap();
            prop_assert!(compute_wstar(&n, 2000).unwrap().wstar >= 1.0 - 1e-9);
        }

        #[test]
        fn weight_paths_agree(x in 0.0f64..30.0, theta in 0.05f64..1.0) {
            let m = exponential(theta);
            let direct = m.target_density(&[x]) / m.proposal_density(&[x]);
            let logs = m.weight_at(&[x]).unwrap();
            prop_assert!((direct - logs).abs() <= 1e-12 * logs.abs().max(1e-300));
        }
    }
}
