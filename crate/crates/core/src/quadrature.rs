#![allow(clippy::excessive_precision)]

//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite and
//! (semi-)infinite intervals.
//!
//! Infinite endpoints are removed by the rational map `x = a + s·t/(1-t)`
//! (mirrored for a left tail), after which every piece lives on a bounded
//! parameter interval and is subdivided by largest error first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

// Kronrod abscissae, largest first; odd positions are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Change of variables used for an infinite endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailMap {
    /// `x = a + scale·t/(1-t)` for `t ∈ [0, 1)`.
    Rational { scale: f64 },
}

impl Default for TailMap {
    fn default() -> Self {
        TailMap::Rational { scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail_map: TailMap,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            tail_map: TailMap::default(),
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidModel("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 10 {
            return Err(Error::InvalidModel("quadrature needs at least 10 subdivisions".into()));
        }
        Ok(())
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    /// Same tolerances, twice the subdivision budget (used for
    /// discontinuous indicator integrands).
    pub fn doubled(mut self) -> Self {
        self.max_subdivisions *= 2;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
enum Map {
    Identity,
    RightTail { origin: f64, scale: f64 },
    LeftTail { origin: f64, scale: f64 },
}

impl Map {
    #[inline]
    fn apply<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            Map::Identity => f(t),
            Map::RightTail { origin, scale } => {
                let s = 1.0 - t;
                let y = f(origin + scale * t / s);
                if y == 0.0 {
                    0.0
                } else {
                    y * scale / (s * s)
                }
            }
            Map::LeftTail { origin, scale } => {
                let s = 1.0 - t;
                let y = f(origin - scale * t / s);
                if y == 0.0 {
                    0.0
                } else {
                    y * scale / (s * s)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    map: Map,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One 15-point Kronrod panel with its 7-point Gauss companion.
fn kronrod15<F: Fn(f64) -> f64>(f: &F, map: Map, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = map.apply(f, center);
    let mut res_k = f_center * WGK[7];
    let mut res_g = f_center * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = map.apply(f, center - dx);
        let f2 = map.apply(f, center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let err = (res_k - res_g) * half;
    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let err = rescale_error(err, res_abs, res_asc);
    (value, if err.is_finite() { err } else { f64::INFINITY })
}

/// A single non-adaptive 15-point panel on a finite interval, returning the
/// value and its error estimate.
pub fn gauss_kronrod15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> (f64, f64) {
    kronrod15(&f, Map::Identity, a, b)
}

/// Integrate `f` over `[a, b]`; either endpoint may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    integrate_with_breaks(f, &[a, b], cfg)
}

/// Integrate over `[breaks[0], breaks.last()]`, seeding the subdivision with
/// the given interior break points (kinks or discontinuities of `f`).
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Integral> {
    let mut points: Vec<f64> = breaks.iter().copied().filter(|x| !x.is_nan()).collect();
    if points.len() < 2 {
        return Err(Error::InvalidModel("integration needs two end points".into()));
    }
    let (a, b) = (points[0], points[points.len() - 1]);
    if a > b {
        return Err(Error::InvalidModel(format!(
            "integration bounds out of order: [{a}, {b}]"
        )));
    }
    points.retain(|&x| x >= a && x <= b);
    points.sort_by(f64::total_cmp);
    points.dedup();
    if points.len() < 2 {
        return Ok(Integral {
            value: 0.0,
            abs_error: 0.0,
            subdivisions: 0,
            evaluations: 0,
        });
    }

    let TailMap::Rational { scale } = cfg.tail_map;
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0usize;
    for w in points.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (map, tlo, thi) = match (lo.is_infinite(), hi.is_infinite()) {
            (false, false) => (Map::Identity, lo, hi),
            (false, true) => (Map::RightTail { origin: lo, scale }, 0.0, 1.0),
            (true, false) => (Map::LeftTail { origin: hi, scale }, 0.0, 1.0),
            (true, true) => {
                // split the real line at zero
                let (v, e) = kronrod15(&f, Map::LeftTail { origin: 0.0, scale }, 0.0, 1.0);
                heap.push(Piece {
                    lo: 0.0,
                    hi: 1.0,
                    map: Map::LeftTail { origin: 0.0, scale },
                    value: v,
                    error: e,
                });
                evaluations += 15;
                (Map::RightTail { origin: 0.0, scale }, 0.0, 1.0)
            }
        };
        let (v, e) = kronrod15(&f, map, tlo, thi);
        evaluations += 15;
        heap.push(Piece {
            lo: tlo,
            hi: thi,
            map,
            value: v,
            error: e,
        });
    }

    let mut frozen: Vec<Piece> = Vec::new();
    let mut subdivisions = 0usize;
    loop {
        let total: f64 = heap.iter().chain(frozen.iter()).map(|p| p.value).sum();
        let err: f64 = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= tol {
            return Ok(Integral {
                value: total,
                abs_error: err,
                subdivisions,
                evaluations,
            });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => {
                return Err(Error::QuadratureFailure {
                    estimate: total,
                    error: err,
                    subdivisions,
                })
            }
        };
        if subdivisions >= cfg.max_subdivisions {
            heap.push(worst);
            return Err(Error::QuadratureFailure {
                estimate: total,
                error: err,
                subdivisions,
            });
        }
        let mid = 0.5 * (worst.lo + worst.hi);
        let width_floor = 8.0 * f64::EPSILON * worst.lo.abs().max(worst.hi.abs()).max(f64::MIN_POSITIVE);
        if worst.hi - worst.lo <= width_floor || mid <= worst.lo || mid >= worst.hi {
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = kronrod15(&f, worst.map, worst.lo, mid);
        let (v2, e2) = kronrod15(&f, worst.map, mid, worst.hi);
        evaluations += 30;
        subdivisions += 1;
        heap.push(Piece {
            lo: worst.lo,
            hi: mid,
            map: worst.map,
            value: v1,
            error: e1,
        });
        heap.push(Piece {
            lo: mid,
            hi: worst.hi,
            map: worst.map,
            value: v2,
            error: e2,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tight() -> QuadratureConfig {
        QuadratureConfig::default().with_abs_tol(1e-14).with_rel_tol(1e-13)
    }

    #[test]
    fn kronrod_rule_is_exact_for_degree_22() {
        // one panel, no subdivision
        for deg in 0..=22 {
            let (v, _) = kronrod15(&|x: f64| x.powi(deg), Map::Identity, 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn gauss_companion_is_exact_for_degree_13() {
        for deg in 0..=13 {
            let f = |x: f64| x.powi(deg);
            let center = 0.5;
            let half = 0.5;
            let mut g = f(center) * WG[3];
            for j in (1..7).step_by(2) {
                g += WG[j / 2] * (f(center - half * XGK[j]) + f(center + half * XGK[j]));
            }
            assert_relative_eq!(g * half, 1.0 / (deg as f64 + 1.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn smooth_finite_interval() {
        let r = integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI, &tight()).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn semi_infinite_exponential_tail() {
        let r = integrate(|x: f64| (-x).exp(), 3.0, f64::INFINITY, &tight()).unwrap();
        assert_relative_eq!(r.value, (-3.0f64).exp(), max_relative = 1e-12);
        let r = integrate(|x: f64| x.exp(), f64::NEG_INFINITY, -2.0, &tight()).unwrap();
        assert_relative_eq!(r.value, (-2.0f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn whole_line_cauchy_mass() {
        let pdf = |x: f64| 1.0 / (std::f64::consts::PI * (1.0 + x * x));
        let r = integrate(pdf, f64::NEG_INFINITY, f64::INFINITY, &tight()).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn discontinuous_integrand_with_budget() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let cfg = QuadratureConfig::default().doubled();
        let r = integrate(step, 0.0, 1.0, &cfg).unwrap();
        assert!((r.value - 0.3).abs() < 1e-9);
        let r = integrate_with_breaks(step, &[0.0, 0.3, 1.0], &tight()).unwrap();
        assert_relative_eq!(r.value, 0.3, max_relative = 1e-13);
    }

    #[test]
    fn failure_reports_estimate() {
        let cfg = QuadratureConfig {
            max_subdivisions: 10,
            ..tight()
        };
        let err = integrate(|x: f64| 1.0 / x.sqrt().max(1e-300), 0.0, 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn empty_interval_is_zero() {
        let r = integrate(|x: f64| x, 2.0, 2.0, &tight()).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
