use crate::error::{Error, Result};
use crate::general::{lambda_fn, WeightCdfPair};
use crate::measures::GeneralModel;
use crate::quadrature::{gauss_kronrod15, integrate, Integral, QuadratureConfig};

/// `Tₙ − 1` tabulated for one `n`.
///
/// For `w < w⋆`, `Tₙ(w) − 1 = Hₙ(w) − λ(w)ⁿ` with
/// `Hₙ(w) = ∫_w^{w⋆} n λ(v)^{n−1} (1 − Π̃(v)) / v² dv`, which follows from
/// `λ'(v) = Π̃(v)/v²`. Both terms are nonnegative, so the difference keeps
/// its relative accuracy when `Tₙ` is within `λ⋆ⁿ` of 1.
pub struct TnTable<'a> {
    pair: &'a WeightCdfPair,
    n: usize,
    /// `Hₙ` at the grid nodes.
    h_nodes: Vec<f64>,
}

impl<'a> TnTable<'a> {
    pub fn new(pair: &'a WeightCdfPair, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("Tn needs n >= 1".into()));
        }
        if pair.is_monte_carlo() {
            return Err(Error::InvalidModel(
                "the n-step kernel is only available for 1-D models".into(),
            ));
        }
        let mut h_nodes = Vec::new();
        if let Some(g) = pair.grid() {
            let m = g.len();
            h_nodes = vec![0.0; m];
            let f = |t: f64| Self::integrand_t(pair, n, t);
            for i in (0..m - 1).rev() {
                h_nodes[i] = h_nodes[i + 1] + gauss_kronrod15(f, g.h * i as f64, g.cell_end(i)).0;
            }
        }
        Ok(Self { pair, n, h_nodes })
    }

    /// `n λ^{n−1} (1 − Π̃) / v²` in the grid coordinate `t`, where
    /// `dv = 2s·v dt`.
    fn integrand_t(pair: &WeightCdfPair, n: usize, t: f64) -> f64 {
        let g = pair.grid().expect("grid present");
        let tail = g.tail_t(t);
        if tail == 0.0 {
            return 0.0;
        }
        let s = g.s_max - t;
        n as f64 * g.lambda_t(t).powi(n as i32 - 1) * tail * 2.0 * s * (-g.u_of(t)).exp()
    }

    fn integrand_direct(&self, v: f64) -> f64 {
        let t = self.pair.tail(v);
        self.n as f64 * lambda_fn(self.pair, v).powi(self.n as i32 - 1) * t / (v * v)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `Hₙ(w)`; zero for `w ≥ w⋆`.
    pub fn h(&self, w: f64) -> f64 {
        let wstar = self.pair.wstar();
        if w >= wstar {
            return 0.0;
        }
        let w_low = self.pair.w_low();
        if let (Some(g), true) = (self.pair.grid(), w >= w_low) {
            let t = g.t_of(w.ln());
            let i = g.cell_index(t);
            let b = g.cell_end(i);
            let f = |s: f64| Self::integrand_t(self.pair, self.n, s);
            return self.h_nodes[i + 1] + gauss_kronrod15(f, t.min(b), b).0;
        }
        let top = if self.h_nodes.is_empty() { 0.0 } else { self.h_nodes[0] };
        let upper = if self.h_nodes.is_empty() { wstar } else { w_low };
        let cfg = QuadratureConfig::default().with_abs_tol(1e-300).with_rel_tol(1e-10);
        let rest = integrate(|v| self.integrand_direct(v), w, upper, &cfg)
            .map(|i| i.value)
            .unwrap_or_else(|e| match e {
                Error::QuadratureFailure { estimate, .. } => estimate,
                _ => f64::NAN,
            });
        top + rest
    }

    /// `Tₙ(w) − 1`.
    pub fn minus_one(&self, w: f64) -> f64 {
        if w >= self.pair.wstar() {
            return -(1.0 - 1.0 / w).powi(self.n as i32);
        }
        if self.n == 1 {
            return 1.0 / w - 1.0;
        }
        self.h(w) - lambda_fn(self.pair, w).powi(self.n as i32)
    }

    pub fn value(&self, w: f64) -> f64 {
        1.0 + self.minus_one(w)
    }
}

/// `Tₙ(w) = ∫_w^∞ n λ^{n−1}(v) / v² dv`, using the closed form
/// `1 − (1 − 1/w)ⁿ` for `w ≥ w⋆` and the tabulated head otherwise.
pub fn t_n(pair: &WeightCdfPair, n: usize, w: f64) -> Result<f64> {
    if !(w > 0.0) {
        return Err(Error::InvalidModel(format!("Tn needs w > 0, got {w}")));
    }
    if n == 0 {
        return Err(Error::InvalidModel("Tn needs n >= 1".into()));
    }
    if w >= pair.wstar() {
        return Ok(1.0 - (1.0 - 1.0 / w).powi(n as i32));
    }
    Ok(TnTable::new(pair, n)?.value(w))
}

/// `Tₙ(w)` by adaptive quadrature of the defining integral over
/// `[w, ∞)`, with no closed-form pieces.
pub fn t_n_direct(pair: &WeightCdfPair, n: usize, w: f64, cfg: &QuadratureConfig) -> Result<Integral> {
    if !(w > 0.0) || n == 0 {
        return Err(Error::InvalidModel(format!(
            "Tn needs n >= 1 and w > 0 (got n = {n}, w = {w})"
        )));
    }
    let f = |v: f64| n as f64 * lambda_fn(pair, v).powi(n as i32 - 1) / (v * v);
    let wstar = pair.wstar();
    let mut breaks = vec![w];
    if w < wstar {
        breaks.push(wstar);
    }
    breaks.push(f64::INFINITY);
    crate::quadrature::integrate_with_breaks(f, &breaks, cfg)
}

struct Split {
    wx: f64,
    /// Pieces of the support with their sub-level label at `w(x)`.
    pieces: Vec<(f64, f64, bool)>,
}

fn split(model: &GeneralModel, pair: &WeightCdfPair, x: f64) -> Result<Split> {
    let scan = pair
        .scan()
        .ok_or_else(|| Error::InvalidModel("the n-step kernel is only available for 1-D models".into()))?;
    let wx = model.weight_at(&[x])?;
    Ok(Split {
        wx,
        pieces: scan.pieces(wx),
    })
}

fn scaled_cfg(cfg: &QuadratureConfig, scale: f64) -> QuadratureConfig {
    QuadratureConfig {
        abs_tol: (cfg.abs_tol * scale).max(1e-300),
        ..*cfg
    }
}

fn clip(a: f64, b: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let (l, h) = (a.max(lo), b.min(hi));
    (h > l).then_some((l, h))
}

/// `Pⁿ(x, A)` for `A = [a, b]`:
/// `∫_A Tₙ(max{w(x), w(y)}) π(y) dy + λ(w(x))ⁿ 1{x ∈ A}`.
pub fn n_step_kernel(
    model: &GeneralModel,
    pair: &WeightCdfPair,
    n: usize,
    x: f64,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if !(a <= b) {
        return Err(Error::InvalidModel(format!("set [{a}, {b}] is not an interval")));
    }
    let s = split(model, pair, x)?;
    let table = TnTable::new(pair, n)?;
    let at_x = table.minus_one(s.wx);
    let target = |y: f64| model.target_density(&[y]);
    let mut total = 0.0;
    for (lo, hi, inside) in s.pieces {
        let Some((l, h)) = clip(lo, hi, a, b) else {
            continue;
        };
        let mass = integrate(target, l, h, cfg)?.value;
        total += mass;
        if inside {
            total += at_x * mass;
        } else {
            let f = |y: f64| {
                let t = target(y);
                if t == 0.0 {
                    0.0
                } else {
                    table.minus_one(model.weight_or_zero(y)) * t
                }
            };
            total += integrate(f, l, h, &cfg.doubled())?.value;
        }
    }
    if a <= x && x <= b {
        total += lambda_fn(pair, s.wx).powi(n as i32);
    }
    Ok(total)
}

/// `‖Pⁿ(x,·) − π‖_TV = ½(λ(w(x))ⁿ + ∫ |Tₙ(max{w(x), w(y)}) − 1| π(y) dy)`:
/// the atom at `x` is singular to π and the rest is a density.
pub fn tv_at_point_general(
    model: &GeneralModel,
    pair: &WeightCdfPair,
    n: usize,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if n == 0 {
        model.weight_at(&[x])?;
        return Ok(1.0);
    }
    let s = split(model, pair, x)?;
    let table = TnTable::new(pair, n)?;
    let scale = (1.0 - 1.0 / pair.wstar()).max(0.0).powi(n as i32);
    let qcfg = scaled_cfg(cfg, scale).doubled();
    let at_x = table.minus_one(s.wx).abs();
    let target = |y: f64| model.target_density(&[y]);
    let mut integral = 0.0;
    for (lo, hi, inside) in s.pieces {
        if inside {
            if at_x > 0.0 {
                integral += at_x * integrate(target, lo, hi, &QuadratureConfig::default().with_abs_tol(1e-14))?.value;
            }
        } else {
            let f = |y: f64| {
                let t = target(y);
                if t == 0.0 {
                    0.0
                } else {
                    table.minus_one(model.weight_or_zero(y)).abs() * t
                }
            };
            integral += integrate(f, lo, hi, &qcfg)?.value;
        }
    }
    let atom = lambda_fn(pair, s.wx).powi(n as i32);
    Ok((0.5 * (atom + integral)).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::general::{rejection_probability, weight_cdf_pair};
    use crate::measures::DensitySpec;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn exponential(theta: f64) -> GeneralModel {
        GeneralModel::from_specs(
            "exponential",
            DensitySpec::Exponential { rate: 1.0 },
            DensitySpec::Exponential { rate: theta },
            None,
        )
        .unwrap()
    }

    fn half() -> &'static (GeneralModel, WeightCdfPair) {
        static CELL: OnceLock<(GeneralModel, WeightCdfPair)> = OnceLock::new();
        CELL.get_or_init(|| {
            let m = exponential(0.5);
            let p = weight_cdf_pair(&m, &QuadratureConfig::default()).unwrap();
            (m, p)
        })
    }

    /// θ = 1/2: `λ(v) = v/4` on `(0, 2]`, so `Tₙ` has a closed form.
    fn t_closed(n: usize, w: f64) -> f64 {
        let tail = 1.0 - 0.5f64.powi(n as i32);
        if w >= 2.0 {
            return 1.0 - (1.0 - 1.0 / w).powi(n as i32);
        }
        let head = match n {
            1 => 1.0 / w - 0.5,
            2 => 0.5 * (2.0 / w).ln(),
            _ => {
                let k = n as i32 - 2;
                n as f64 / 4f64.powi(n as i32 - 1) * (2f64.powi(k) - w.powi(k)) / k as f64
            }
        };
        head + tail
    }

    #[test]
    fn lambda_matches_closed_form() {
        let (_, pair) = half();
        for v in [1e-4, 0.01, 0.3, 1.0, 1.7, 1.999] {
            assert!((lambda_fn(pair, v) - v / 4.0).abs() < 1e-10, "v = {v}");
        }
        assert_eq!(lambda_fn(pair, 4.0), 0.75);
        assert!((pair.pi_tilde(1.0).unwrap() - 0.25).abs() < 1e-10);
        assert!((pair.p_tilde(1.0).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rejection_probability_closed_form() {
        let (m, pair) = half();
        let x = 2.0 * 2f64.ln();
        let r = rejection_probability(m, &[x], &QuadratureConfig::default()).unwrap();
        assert!((r.value - 0.25).abs() < 1e-10);
        let r0 = rejection_probability(m, &[0.0], &QuadratureConfig::default()).unwrap();
        assert!((r0.value - 0.5).abs() < 1e-10);
        for x in [0.1, 1.0, 3.0, 7.0] {
            let r = rejection_probability(m, &[x], &QuadratureConfig::default())
                .unwrap()
                .value;
            let lam = lambda_fn(pair, m.weight_at(&[x]).unwrap());
            assert!((r - lam).abs() < 1e-8, "x = {x}: {r} vs {lam}");
        }
    }

    #[test]
    fn t_n_matches_antiderivative() {
        let (_, pair) = half();
        for n in [1, 2, 3, 5, 10, 40] {
            for w in [1e-3, 0.2, 1.0, 1.5, 2.0, 3.0] {
                let got = t_n(pair, n, w).unwrap();
                let want = t_closed(n, w);
                assert!(
                    (got - want).abs() < 1e-9 * want.max(1.0),
                    "n={n} w={w}: {got} vs {want}"
                );
            }
        }
        assert!((t_n(pair, 1, 2.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn t_n_against_dense_riemann_sum() {
        let (_, pair) = half();
        let panels = 1_000_000;
        let h = 1.0 / panels as f64;
        let head: f64 = (0..panels)
            .map(|i| {
                let v = 1.0 + (i as f64 + 0.5) * h;
                3.0 * (v / 4.0).powi(2) / (v * v) * h
            })
            .sum();
        let riemann = head + 1.0 - 0.125;
        assert!((t_n(pair, 3, 1.0).unwrap() - riemann).abs() < 1e-6);
    }

    #[test]
    fn minus_one_keeps_relative_accuracy() {
        let (_, pair) = half();
        let n = 60;
        let table = TnTable::new(pair, n).unwrap();
        for w in [0.05, 0.5, 1.0, 1.9] {
            let want = t_closed(n, w) - 1.0;
            // closed form in terms of tiny differences
            let k = n as i32 - 2;
            let exact =
                n as f64 / 4f64.powi(n as i32 - 1) * (2f64.powi(k) - w.powi(k)) / k as f64 - 0.5f64.powi(n as i32);
            let got = table.minus_one(w);
            assert!(
                (got - exact).abs() <= 1e-7 * exact.abs(),
                "w={w}: {got} vs {exact} ({want})"
            );
        }
    }

    #[test]
    fn kernel_normalizes() {
        let (m, pair) = half();
        let cfg = QuadratureConfig::default();
        for x in [0.0, 1.0, 4.0] {
            for n in [1, 2, 5] {
                let total = n_step_kernel(m, pair, n, x, 0.0, f64::INFINITY, &cfg).unwrap();
                assert!((total - 1.0).abs() < 1e-6, "x={x} n={n}: {total}");
            }
        }
    }

    #[test]
    fn kernel_from_the_mode_mixes_atom_and_target() {
        let (m, pair) = half();
        let cfg = QuadratureConfig::default();
        for n in [1usize, 3, 6] {
            let r = 0.5f64.powi(n as i32);
            for (a, b) in [(0.0f64, 1.0f64), (0.5, 2.0), (2.0, f64::INFINITY)] {
                let pa = (-a).exp() - (-b).exp();
                let atom = if a <= 0.0 { r } else { 0.0 };
                let got = n_step_kernel(m, pair, n, 0.0, a, b, &cfg).unwrap();
                assert!((got - (atom + (1.0 - r) * pa)).abs() < 1e-8, "n={n} [{a},{b}]");
            }
        }
    }

    #[test]
    fn tv_from_the_mode_is_exact() {
        let (m, pair) = half();
        for n in 1..=12 {
            let tv = tv_at_point_general(m, pair, n, 0.0, &QuadratureConfig::default()).unwrap();
            assert!(
                (tv - 0.5f64.powi(n as i32)).abs() < 1e-10 * 0.5f64.powi(n as i32),
                "n={n}: {tv}"
            );
        }
    }

    #[test]
    fn tv_bounds_and_monotone() {
        let (m, pair) = half();
        let cfg = QuadratureConfig::default();
        for x in [0.3, 2.0 * 2f64.ln(), 3.0, 8.0] {
            let r = rejection_probability(m, &[x], &cfg).unwrap().value;
            let mut prev = 1.0;
            for n in 1..=20 {
                let tv = tv_at_point_general(m, pair, n, x, &cfg).unwrap();
                assert!(tv >= r.powi(n as i32) - 1e-8, "x={x} n={n}");
                assert!(tv <= 0.5f64.powi(n as i32) + 1e-8, "x={x} n={n}");
                assert!(tv <= prev + 1e-8);
                prev = tv;
            }
        }
    }

    #[test]
    fn identical_densities_have_zero_tv() {
        let m = exponential(1.0);
        let pair = weight_cdf_pair(&m, &QuadratureConfig::default()).unwrap();
        for n in 1..4 {
            let tv = tv_at_point_general(&m, &pair, n, 1.3, &QuadratureConfig::default()).unwrap();
            assert!(tv.abs() < 1e-12);
        }
    }

    #[test]
    fn two_sided_level_sets() {
        let m = GeneralModel::from_specs(
            "normal",
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            DensitySpec::Normal { mean: 0.0, sd: 2.0 },
            None,
        )
        .unwrap();
        let cfg = QuadratureConfig::default();
        let pair = weight_cdf_pair(&m, &cfg).unwrap();
        assert!((pair.wstar() - 2.0).abs() < 1e-9);
        for n in [1, 4, 9] {
            let tv = tv_at_point_general(&m, &pair, n, 0.0, &cfg).unwrap();
            assert!((tv - 0.5f64.powi(n as i32)).abs() < 1e-8 * 0.5f64.powi(n as i32));
        }
        for x in [0.7, -1.5, 3.0] {
            let r = rejection_probability(&m, &[x], &cfg).unwrap().value;
            for n in [1usize, 2, 5, 15] {
                let total = n_step_kernel(&m, &pair, n, x, f64::NEG_INFINITY, f64::INFINITY, &cfg).unwrap();
                assert!((total - 1.0).abs() < 1e-6, "x={x} n={n}: {total}");
                let tv = tv_at_point_general(&m, &pair, n, x, &cfg).unwrap();
                assert!(tv >= r.powi(n as i32) - 1e-8 && tv <= 0.5f64.powi(n as i32) + 1e-8);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn direct_quadrature_matches_closed_form_tail(n in 1usize..60, w in 2.0f64..50.0) {
            let (_, pair) = half();
            let got = t_n_direct(pair, n, w, &QuadratureConfig::default().with_abs_tol(1e-12)).unwrap().value;
            let want = 1.0 - (1.0 - 1.0 / w).powi(n as i32);
            prop_assert!((got - want).abs() < 1e-8);
        }
    }
}
