use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{
    compute_wstar, default_budget, log_weight_or_limit, truncated_bounds, GeneralModel, GridMap, WeightSummary,
};
use crate::quadrature::{integrate, QuadratureConfig};
use crate::rng;

/// Nodes of the interpolation grid for `λ`.
pub const LAMBDA_NODES: usize = 4097;
/// Grid nodes scanned when locating sub-level set boundaries.
const SCAN_NODES: usize = 4001;
/// The `λ` grid spans `[w⋆·LOW_FACTOR, w⋆]` unless `w` is bounded away from 0.
const LOW_FACTOR: f64 = 1e-6;
/// Draws per measure for the Monte Carlo backend.
pub const MC_DRAWS: usize = 1_000_000;
const MC_SEED: u64 = 0x1e7e_15e7;

/// Target and proposal masses of `C(v) = {w ≤ v}` and of its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMasses {
    pub pi_in: f64,
    pub p_in: f64,
    pub pi_out: f64,
    pub p_out: f64,
    /// Quadrature error bound, or Monte Carlo standard error of `λ`.
    pub error: f64,
}

impl LevelMasses {
    /// `P̃(v) − Π̃(v)/v`, evaluated from whichever side of the level set
    /// carries less target mass.
    pub fn lambda(&self, v: f64) -> f64 {
        let l = if self.pi_in <= 0.5 {
            self.p_in - self.pi_in / v
        } else {
            (1.0 - 1.0 / v) - self.p_out + self.pi_out / v
        };
        l.clamp(0.0, 1.0)
    }

    pub fn pi_tilde(&self) -> f64 {
        if self.pi_in <= 0.5 {
            self.pi_in
        } else {
            1.0 - self.pi_out
        }
    }

    pub fn p_tilde(&self) -> f64 {
        if self.p_in <= 0.5 {
            self.p_in
        } else {
            1.0 - self.p_out
        }
    }
}

/// A 1-D weight function sampled on a grid, used to split the support
/// into sub-level and super-level pieces.
#[derive(Clone)]
pub(crate) struct LevelScan {
    model: GeneralModel,
    lower: f64,
    upper: f64,
    xs: Vec<f64>,
    lws: Vec<f64>,
    cfg: QuadratureConfig,
}

impl LevelScan {
    pub(crate) fn new(model: &GeneralModel, nodes: usize, cfg: &QuadratureConfig) -> Result<Self> {
        let (a, b) = model
            .bounds_1d()
            .ok_or_else(|| Error::InvalidModel("level-set quadrature needs a 1-D support".into()))?;
        let mut warnings = Vec::new();
        let (lo, hi) = truncated_bounds(model, a, b, &mut warnings);
        let map = GridMap::new(a, b, lo, hi);
        let xs: Vec<f64> = (0..nodes).map(|i| map.at(i, nodes)).collect();
        let lws = xs.iter().map(|&x| log_weight_or_limit(model, &[x])).collect();
        let cfg = QuadratureConfig {
            abs_tol: cfg.abs_tol.min(1e-13),
            rel_tol: cfg.rel_tol.min(1e-10),
            ..*cfg
        };
        Ok(Self {
            model: model.clone(),
            lower: a,
            upper: b,
            xs,
            lws,
            cfg,
        })
    }

    fn lw(&self, x: f64) -> f64 {
        log_weight_or_limit(&self.model, &[x])
    }

    pub(crate) fn min_log_weight(&self) -> f64 {
        self.lws.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Point between `l` (status `sl`) and `r` where `ln w ≤ lv` flips.
    fn crossing(&self, mut l: f64, mut r: f64, lv: f64) -> f64 {
        let sl = self.lw(l) <= lv;
        for _ in 0..200 {
            let m = 0.5 * (l + r);
            if (r - l).abs() <= 1e-13 * m.abs().max(1.0) || m == l || m == r {
                break;
            }
            if (self.lw(m) <= lv) == sl {
                l = m;
            } else {
                r = m;
            }
        }
        0.5 * (l + r)
    }

    /// Follow an infinite end outward looking for a status change beyond
    /// the scanned range.
    fn tail_crossing(&self, from: f64, dir: f64, lv: f64) -> Option<f64> {
        let s0 = self.lw(from) <= lv;
        let mut step = from.abs().max(1.0);
        let mut prev = from;
        for _ in 0..1100 {
            let x = from + dir * step;
            if !x.is_finite() {
                return None;
            }
            if (self.lw(x) <= lv) != s0 {
                return Some(self.crossing(prev, x, lv));
            }
            let dead = self.model.proposal_log_density(&[x]) < -745.0 && self.model.target_log_density(&[x]) < -745.0;
            if dead {
                return None;
            }
            prev = x;
            step *= 2.0;
        }
        None
    }

    /// Pieces of the support labelled `true` where `w ≤ v`.
    pub(crate) fn pieces(&self, v: f64) -> Vec<(f64, f64, bool)> {
        let lv = v.ln();
        let n = self.xs.len();
        let status: Vec<bool> = self.lws.iter().map(|l| *l <= lv).collect();
        let mut cuts = vec![self.lower];
        if !self.lower.is_finite() {
            if let Some(c) = self.tail_crossing(self.xs[0], -1.0, lv) {
                cuts.push(c);
            }
        }
        for i in 0..n - 1 {
            if status[i] != status[i + 1] {
                cuts.push(self.crossing(self.xs[i], self.xs[i + 1], lv));
            }
        }
        if !self.upper.is_finite() {
            if let Some(c) = self.tail_crossing(self.xs[n - 1], 1.0, lv) {
                cuts.push(c);
            }
        }
        cuts.push(self.upper);
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let (a, b) = (w[0], w[1]);
                let probe = match (a.is_finite(), b.is_finite()) {
                    (true, true) => 0.5 * (a + b),
                    (true, false) => a + 1e-6 * a.abs().max(1.0),
                    (false, true) => b - 1e-6 * b.abs().max(1.0),
                    (false, false) => self.xs[0],
                };
                (a, b, self.lw(probe) <= lv)
            })
            .collect()
    }

    pub(crate) fn masses(&self, v: f64) -> Result<LevelMasses> {
        let mut m = LevelMasses {
            pi_in: 0.0,
            p_in: 0.0,
            pi_out: 0.0,
            p_out: 0.0,
            error: 0.0,
        };
        for (a, b, inside) in self.pieces(v) {
            let t = integrate(|y| self.model.target_density(&[y]), a, b, &self.cfg)?;
            let p = integrate(|y| self.model.proposal_density(&[y]), a, b, &self.cfg)?;
            m.error += t.abs_error / v + p.abs_error;
            if inside {
                m.pi_in += t.value;
                m.p_in += p.value;
            } else {
                m.pi_out += t.value;
                m.p_out += p.value;
            }
        }
        Ok(m)
    }
}

/// Sorted `ln w` of draws from π and from p.
#[derive(Clone)]
struct McLevels {
    under_pi: Vec<f64>,
    under_p: Vec<f64>,
}

impl McLevels {
    fn new(model: &GeneralModel, draws: usize, seed: u64) -> Result<Self> {
        if !model.has_target_sampler() {
            return Err(Error::InvalidModel(
                "Monte Carlo level sets need a sampler for the target".into(),
            ));
        }
        let sample = |stream: u64, from_target: bool| -> Vec<f64> {
            let mut rng = rng::stream(seed, stream);
            let mut v: Vec<f64> = (0..draws)
                .map(|_| {
                    let x = if from_target {
                        model.sample_target(&mut rng).expect("checked above")
                    } else {
                        model.sample_proposal(&mut rng)
                    };
                    log_weight_or_limit(model, &x)
                })
                .collect();
            v.sort_by(f64::total_cmp);
            v
        };
        Ok(Self {
            under_pi: sample(0, true),
            under_p: sample(1, false),
        })
    }

    fn masses(&self, v: f64) -> LevelMasses {
        let lv = v.ln();
        let frac = |s: &[f64]| s.partition_point(|x| *x <= lv) as f64 / s.len() as f64;
        let (pi_in, p_in) = (frac(&self.under_pi), frac(&self.under_p));
        let n = self.under_pi.len() as f64;
        let se = ((p_in * (1.0 - p_in)) / n).sqrt() + ((pi_in * (1.0 - pi_in)) / n).sqrt() / v;
        LevelMasses {
            pi_in,
            p_in,
            pi_out: 1.0 - pi_in,
            p_out: 1.0 - p_in,
            error: se,
        }
    }
}

#[derive(Clone)]
enum Backend {
    Quadrature(Box<LevelScan>),
    MonteCarlo(McLevels),
}

/// Cubic Hermite data for `λ` and `1 − Π̃` on a grid uniform in
/// `t = s_max − s`, where `s = sqrt(ln w⋆ − ln v)`.
///
/// Near `w⋆` the mass `1 − Π̃` behaves like a power of `w⋆ − v`: linear when
/// the maximum sits on the boundary and like a square root at an interior
/// quadratic maximum. Both are smooth in `s`.
#[derive(Debug, Clone)]
pub(crate) struct LambdaGrid {
    pub(crate) u_star: f64,
    pub(crate) s_max: f64,
    /// Spacing in `t`.
    pub(crate) h: f64,
    pub(crate) lambda: Vec<f64>,
    /// `dλ/dt = 2s·Π̃(v)/v`.
    pub(crate) dlambda: Vec<f64>,
    pub(crate) tail: Vec<f64>,
    pub(crate) dtail: Vec<f64>,
}

fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, h: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Fritsch–Carlson limiter applied per cell.
fn limited(y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> (f64, f64) {
    let delta = (y1 - y0) / h;
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let (mut a, mut b) = (d0 / delta, d1 / delta);
    if a < 0.0 {
        a = 0.0;
    }
    if b < 0.0 {
        b = 0.0;
    }
    let r = a * a + b * b;
    if r > 9.0 {
        let t = 3.0 / r.sqrt();
        a *= t;
        b *= t;
    }
    (a * delta, b * delta)
}

/// Fourth-order finite-difference slopes, one-sided near the ends.
fn fd4_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    if n < 5 {
        return pchip_slopes(y, h);
    }
    (0..n)
        .map(|i| {
            if i >= 2 && i + 2 < n {
                (y[i - 2] - 8.0 * y[i - 1] + 8.0 * y[i + 1] - y[i + 2]) / (12.0 * h)
            } else if i < 2 {
                (-25.0 * y[i] + 48.0 * y[i + 1] - 36.0 * y[i + 2] + 16.0 * y[i + 3] - 3.0 * y[i + 4]) / (12.0 * h)
            } else {
                (25.0 * y[i] - 48.0 * y[i - 1] + 36.0 * y[i - 2] - 16.0 * y[i - 3] + 3.0 * y[i - 4]) / (12.0 * h)
            }
        })
        .collect()
}

fn pchip_slopes(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let sec: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    (0..n)
        .map(|i| {
            if i == 0 {
                sec[0]
            } else if i == n - 1 {
                sec[n - 2]
            } else if sec[i - 1] * sec[i] <= 0.0 {
                0.0
            } else {
                2.0 / (1.0 / sec[i - 1] + 1.0 / sec[i])
            }
        })
        .collect()
}

impl LambdaGrid {
    pub(crate) fn t_of(&self, u: f64) -> f64 {
        self.s_max - (self.u_star - u).max(0.0).sqrt()
    }

    pub(crate) fn u_of(&self, t: f64) -> f64 {
        let s = self.s_max - t;
        self.u_star - s * s
    }

    pub(crate) fn len(&self) -> usize {
        self.lambda.len()
    }

    /// Right end of cell `i` in `t`.
    pub(crate) fn cell_end(&self, i: usize) -> f64 {
        if i + 2 == self.len() {
            self.s_max
        } else {
            self.h * (i + 1) as f64
        }
    }

    fn cell(&self, t: f64) -> (usize, f64) {
        let n = self.lambda.len();
        let pos = (t / self.h).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        (i, pos - i as f64)
    }

    pub(crate) fn cell_index(&self, t: f64) -> usize {
        self.cell(t).0
    }

    pub(crate) fn lambda_t(&self, t: f64) -> f64 {
        let (i, s) = self.cell(t);
        let (d0, d1) = limited(
            self.lambda[i],
            self.lambda[i + 1],
            self.dlambda[i],
            self.dlambda[i + 1],
            self.h,
        );
        hermite(self.lambda[i], self.lambda[i + 1], d0, d1, self.h, s).clamp(0.0, 1.0)
    }

    pub(crate) fn tail_t(&self, t: f64) -> f64 {
        let (i, s) = self.cell(t);
        let (d0, d1) = if self.tail[i] == self.tail[i + 1] {
            (0.0, 0.0)
        } else {
            (self.dtail[i], self.dtail[i + 1])
        };
        hermite(self.tail[i], self.tail[i + 1], d0, d1, self.h, s).clamp(0.0, 1.0)
    }

    pub(crate) fn lambda_at(&self, u: f64) -> f64 {
        self.lambda_t(self.t_of(u))
    }

    pub(crate) fn tail_at(&self, u: f64) -> f64 {
        self.tail_t(self.t_of(u))
    }
}

/// `Π̃(v) = π(C(v))` and `P̃(v) = p(C(v))` for the sub-level sets
/// `C(v) = {z : w(z) ≤ v}`, with `λ` cached on a log-spaced grid.
#[derive(Clone)]
pub struct WeightCdfPair {
    backend: Backend,
    summary: WeightSummary,
    grid: Option<LambdaGrid>,
    w_low: f64,
}

/// Build the pair for a model: locate `w⋆` and tabulate `λ` on
/// `LAMBDA_NODES` nodes (1-D) or sample the level sets (multi-D).
pub fn weight_cdf_pair(model: &GeneralModel, cfg: &QuadratureConfig) -> Result<WeightCdfPair> {
    let summary = compute_wstar(model, default_budget(model.support()))?;
    WeightCdfPair::new(model, summary, LAMBDA_NODES, cfg)
}

impl WeightCdfPair {
    pub fn new(model: &GeneralModel, summary: WeightSummary, nodes: usize, cfg: &QuadratureConfig) -> Result<Self> {
        cfg.validate()?;
        if model.dimension() > 1 {
            let mc = McLevels::new(model, MC_DRAWS, MC_SEED)?;
            return Ok(Self {
                backend: Backend::MonteCarlo(mc),
                summary,
                grid: None,
                w_low: 0.0,
            });
        }
        if nodes < 2 {
            return Err(Error::InvalidModel("the lambda grid needs at least two nodes".into()));
        }
        let scan = LevelScan::new(model, SCAN_NODES, cfg)?;
        let wstar = summary.wstar;
        let w_low = (scan.min_log_weight().exp()).clamp(wstar * LOW_FACTOR, wstar);
        let mut pair = Self {
            backend: Backend::Quadrature(Box::new(scan)),
            summary,
            grid: None,
            w_low,
        };
        if w_low < wstar {
            pair.grid = Some(pair.tabulate(nodes)?);
        }
        Ok(pair)
    }

    fn tabulate(&self, nodes: usize) -> Result<LambdaGrid> {
        let u_star = self.summary.wstar.ln();
        let s_max = (u_star - self.w_low.ln()).sqrt();
        let h = s_max / (nodes - 1) as f64;
        let rows: Vec<Result<(f64, f64, f64)>> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let s = s_max - h * i as f64;
                let v = if i == nodes - 1 {
                    self.summary.wstar
                } else {
                    (u_star - s * s).exp()
                };
                let m = self.masses(v)?;
                Ok((m.lambda(v), 2.0 * s * m.pi_tilde() / v, m.pi_out.clamp(0.0, 1.0)))
            })
            .collect();
        let mut lambda = Vec::with_capacity(nodes);
        let mut dlambda = Vec::with_capacity(nodes);
        let mut tail = Vec::with_capacity(nodes);
        for r in rows {
            let (l, d, t) = r?;
            lambda.push(l);
            dlambda.push(d);
            tail.push(t);
        }
        // λ is nondecreasing; remove quadrature jitter at the ulp level
        for i in 1..nodes {
            if lambda[i] < lambda[i - 1] {
                lambda[i] = lambda[i - 1];
            }
            if tail[i] > tail[i - 1] {
                tail[i] = tail[i - 1];
            }
        }
        let dtail = fd4_slopes(&tail, h);
        Ok(LambdaGrid {
            u_star,
            s_max,
            h,
            lambda,
            dlambda,
            tail,
            dtail,
        })
    }

    pub fn wstar(&self) -> f64 {
        self.summary.wstar
    }

    pub fn attained(&self) -> bool {
        self.summary.attained
    }

    pub fn summary(&self) -> &WeightSummary {
        &self.summary
    }

    /// Lower end of the tabulated range; `λ` below it is computed directly.
    pub fn w_low(&self) -> f64 {
        self.w_low
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self.backend, Backend::MonteCarlo(_))
    }

    /// Level-set masses at `v` by quadrature (1-D) or from the samples.
    pub fn masses(&self, v: f64) -> Result<LevelMasses> {
        if v <= 0.0 {
            return Ok(LevelMasses {
                pi_in: 0.0,
                p_in: 0.0,
                pi_out: 1.0,
                p_out: 1.0,
                error: 0.0,
            });
        }
        match &self.backend {
            Backend::Quadrature(scan) => scan.masses(v),
            Backend::MonteCarlo(mc) => Ok(mc.masses(v)),
        }
    }

    pub fn pi_tilde(&self, v: f64) -> Result<f64> {
        Ok(if v >= self.wstar() {
            1.0
        } else {
            self.masses(v)?.pi_tilde()
        })
    }

    pub fn p_tilde(&self, v: f64) -> Result<f64> {
        Ok(if v >= self.wstar() {
            1.0
        } else {
            self.masses(v)?.p_tilde()
        })
    }

    /// `λ(v)` without interpolation.
    pub fn lambda_direct(&self, v: f64) -> Result<f64> {
        if v >= self.wstar() {
            return Ok(1.0 - 1.0 / v);
        }
        Ok(self.masses(v)?.lambda(v))
    }

    pub(crate) fn grid(&self) -> Option<&LambdaGrid> {
        self.grid.as_ref()
    }

    /// `1 − Π̃(v)` from the grid, or directly below it.
    pub(crate) fn tail(&self, v: f64) -> f64 {
        if v >= self.wstar() {
            return 0.0;
        }
        match &self.grid {
            Some(g) if v >= self.w_low => g.tail_at(v.ln()),
            _ => self.masses(v).map(|m| m.pi_out).unwrap_or(1.0),
        }
    }

    pub(crate) fn scan(&self) -> Option<&LevelScan> {
        match &self.backend {
            Backend::Quadrature(s) => Some(s),
            Backend::MonteCarlo(_) => None,
        }
    }
}

/// `λ(v) = P̃(v) − Π̃(v)/v` for `v < w⋆` and `1 − 1/v` beyond.
pub fn lambda_fn(pair: &WeightCdfPair, v: f64) -> f64 {
    if v >= pair.wstar() {
        return 1.0 - 1.0 / v;
    }
    if v <= 0.0 {
        return 0.0;
    }
    match pair.grid() {
        Some(g) if v >= pair.w_low() => g.lambda_at(v.ln()),
        _ => pair.lambda_direct(v).unwrap_or(0.0),
    }
}

/// An estimate with its uncertainty: a quadrature error bound or a Monte
/// Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub monte_carlo: bool,
}

/// Probability that an IMH step from `x` is rejected,
/// `R(x) = 1 − Π̃(w(x))/w(x) − (1 − P̃(w(x)))`.
///
/// 1-D models split the support at the boundary of `C(w(x))` and integrate
/// each piece; higher-dimensional models average the acceptance
/// probability over `MC_DRAWS` proposal draws.
pub fn rejection_probability(model: &GeneralModel, x: &[f64], cfg: &QuadratureConfig) -> Result<Estimate> {
    let wx = model.weight_at(x)?;
    if wx == 0.0 {
        return Err(Error::InvalidModel(format!(
            "w({x:?}) = 0; the rejection probability needs w(x) > 0"
        )));
    }
    if model.dimension() == 1 {
        let scan = LevelScan::new(model, SCAN_NODES, cfg)?;
        let m = scan.masses(wx)?;
        let value = if m.pi_in <= 0.5 {
            m.p_in - m.pi_in / wx
        } else {
            (1.0 - 1.0 / wx) - m.p_out + m.pi_out / wx
        };
        return Ok(Estimate {
            value: value.clamp(0.0, 1.0),
            error: m.error,
            monte_carlo: false,
        });
    }
    let lwx = wx.ln();
    let mut rng = rng::stream(MC_SEED, 7);
    let n = MC_DRAWS;
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let y = model.sample_proposal(&mut rng);
        let a = (log_weight_or_limit(model, &y) - lwx).min(0.0).exp();
        s += a;
        s2 += a * a;
    }
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    Ok(Estimate {
        value: 1.0 - mean,
        error: (var / n as f64).sqrt(),
        monte_carlo: true,
    })
}
