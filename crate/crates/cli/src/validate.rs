//! Fixed-seed check suites over the core library.

use std::f64::consts::PI;

use imh_core::cases::{cauchy_rwmh, cauchy_tail_bound, rate_not_attained_model, sharpness_chains, three_point_chain};
use imh_core::discrete::{
    build_kernel, exact_tv, liu_spectrum, per_point_rate_discrete, random_model_upto, rate_bounds_discrete,
};
use imh_core::general::{n_step_kernel, per_point_rate_general, t_n_direct, tv_at_point_general, weight_cdf_pair};
use imh_core::quadrature::QuadratureConfig;
use imh_core::samplers::{
    coupling_meeting_times, coupling_replicas_discrete, empirical_tv_kernel, meeting_time_survival,
};
use imh_core::{cases, rng};
use rand::Rng;

use crate::{Suite, ValidateArgs};

const RANDOM_MODELS: u64 = 200;
const RATE_MODELS: u64 = 50;
const RATE_HORIZON: usize = 2000;
const T_N_SAMPLES: u64 = 50;

struct Check {
    suite: &'static str,
    name: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Default)]
struct Table(Vec<Check>);

impl Table {
    /// Record `value ≤ tolerance`.
    fn at_most(&mut self, suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) {
        self.0.push(Check {
            suite,
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        });
    }

    fn failed(&mut self, suite: &'static str, name: impl Into<String>, err: impl std::fmt::Display) {
        eprintln!("{suite}: {err}");
        self.0.push(Check {
            suite,
            name: name.into(),
            value: f64::NAN,
            tolerance: f64::NAN,
            pass: false,
        });
    }
}

pub fn validate(a: &ValidateArgs) -> u8 {
    let mut t = Table::default();
    if matches!(a.suite, Suite::Discrete | Suite::All) {
        discrete(&mut t, a.seed);
    }
    if matches!(a.suite, Suite::General | Suite::All) {
        general(&mut t, a.seed);
    }
    if matches!(a.suite, Suite::Coupling | Suite::All) {
        coupling(&mut t, a.replicas, a.seed);
    }
    println!(
        "{:<10} {:<52} {:>12} {:>10}  result",
        "suite", "check", "value", "tolerance"
    );
    for c in &t.0 {
        println!(
            "{:<10} {:<52} {:>12.3e} {:>10.1e}  {}",
            c.suite,
            c.name,
            c.value,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    let failures = t.0.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failures} failed", t.0.len());
    failures.min(100) as u8
}

fn discrete(t: &mut Table, seed: u64) {
    const S: &str = "discrete";
    let mut sandwich_violations = 0.0;
    let (mut resid, mut orth, mut lambda1, mut rev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..RANDOM_MODELS {
        let m = random_model_upto(10, seed, i);
        let k = build_kernel(&m);
        rev = rev.max(k.reversibility_defect(m.target()));
        if rate_bounds_discrete(&m, 50).is_err() {
            sandwich_violations += 1.0;
        }
        match liu_spectrum(&m) {
            Ok(s) => {
                resid = resid.max(s.eigen_residual(&k));
                orth = orth.max(s.orthogonality(m.target()));
                lambda1 = lambda1.max((s.lambda(1) - (1.0 - 1.0 / m.wstar())).abs());
            }
            Err(e) => return t.failed(S, "closed-form spectrum", e),
        }
    }
    t.at_most(S, "reversibility defect, 200 random models", rev, 1e-12);
    t.at_most(
        S,
        "models escaping the d_max sandwich (t <= 50)",
        sandwich_violations,
        0.0,
    );
    t.at_most(S, "eigen-residual", resid, 1e-10);
    t.at_most(S, "pi-orthogonality", orth, 1e-10);
    t.at_most(S, "|lambda_1 - (1 - 1/w*)|", lambda1, 0.0);

    match sharpness_chains(4) {
        Ok((phi1, phi2)) => {
            let gap = |m: &imh_core::measures::DiscreteModel, lower: bool| -> f64 {
                let r = rate_bounds_discrete(m, 50).expect("sandwich holds");
                (1..=50)
                    .map(|s| {
                        let env = if lower { r.lower[s] } else { r.upper[s] };
                        (r.trajectory.d_max[s] - env).abs()
                    })
                    .fold(0.0, f64::max)
            };
            t.at_most(S, "phi_1 d_max minus upper envelope", gap(&phi1, false), 1e-12);
            t.at_most(S, "phi_2 d_max minus lower envelope (t >= 1)", gap(&phi2, true), 1e-12);
        }
        Err(e) => t.failed(S, "sharpness chains", e),
    }

    let mut worst = 0.0f64;
    for i in 0..RATE_MODELS {
        let m = random_model_upto(10, seed ^ 0xa5a5, i);
        match per_point_rate_discrete(&m, RATE_HORIZON) {
            Ok(r) => {
                for s in &r.states {
                    worst = worst.max((s.fit.rate - r.theoretical).abs());
                }
            }
            Err(e) => return t.failed(S, "per-state rates", e),
        }
    }
    t.at_most(S, "per-state fitted rate vs 1 - 1/w*, 50 models", worst, 1e-4);
}

fn general(t: &mut Table, seed: u64) {
    const S: &str = "general";
    let cfg = QuadratureConfig::default();
    let Ok(m) = cases::exponential_exponential(0.5) else {
        return t.failed(S, "exponential model", "construction failed");
    };
    let pair = match weight_cdf_pair(&m, &cfg) {
        Ok(p) => p,
        Err(e) => return t.failed(S, "weight CDF pair", e),
    };
    let wstar = pair.wstar();

    let mut rng = rng::stream(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..T_N_SAMPLES {
        let w = wstar * (1.0 + 20.0 * rng.random::<f64>());
        let n = rng.random_range(1..=20usize);
        match t_n_direct(&pair, n, w, &cfg) {
            Ok(v) => worst = worst.max((v.value - (1.0 - (1.0 - 1.0 / w).powi(n as i32))).abs()),
            Err(e) => return t.failed(S, "T_n quadrature", e),
        }
    }
    t.at_most(S, "T_n quadrature vs 1 - (1 - 1/w)^n, 50 draws", worst, 1e-8);

    let mut worst = 0.0f64;
    for x in [0.0, 1.0, 4.0] {
        for n in [1, 2, 5] {
            match n_step_kernel(&m, &pair, n, x, 0.0, f64::INFINITY, &cfg) {
                Ok(v) => worst = worst.max((v - 1.0).abs()),
                Err(e) => return t.failed(S, "n-step kernel", e),
            }
        }
    }
    t.at_most(S, "|P^n(x, X) - 1|, x in {0,1,4}, n in {1,2,5}", worst, 1e-6);

    let mut worst = 0.0f64;
    for n in 1..=10 {
        match tv_at_point_general(&m, &pair, n, 0.0, &cfg) {
            Ok(v) => worst = worst.max((v - 0.5f64.powi(n as i32)).abs()),
            Err(e) => return t.failed(S, "TV at the maximizer", e),
        }
    }
    t.at_most(S, "TV from x = 0 vs 0.5^n, n <= 10", worst, 1e-6);

    let mut worst = 0.0f64;
    for x in [0.0, 1.0, 3.0] {
        match per_point_rate_general(&m, &pair, x, 60, &cfg) {
            Ok(p) => worst = worst.max((p.rate() - 0.5).abs()),
            Err(e) => return t.failed(S, "per-point rates", e),
        }
    }
    t.at_most(S, "per-point fitted rate vs 0.5, x in {0,1,3}", worst, 2e-2);

    let not_attained = rate_not_attained_model().and_then(|m| {
        let pair = weight_cdf_pair(&m, &cfg)?;
        per_point_rate_general(&m, &pair, 0.0, 80, &cfg)
    });
    match not_attained {
        Ok(p) => {
            t.at_most(S, "not-attained fitted rate vs 1/3", (p.rate() - 1.0 / 3.0).abs(), 3e-2);
            let excess =
                p.tv.iter()
                    .enumerate()
                    .map(|(n, v)| v - (1.0f64 / 3.0).powi(n as i32))
                    .fold(f64::NEG_INFINITY, f64::max);
            t.at_most(S, "not-attained d(n) - (1/3)^n", excess, 1e-8);
        }
        Err(e) => t.failed(S, "not-attained model", e),
    }

    let f = cauchy_rwmh();
    let fine = cfg.with_abs_tol(1e-13);
    let mut sup = 0.0f64;
    for i in -500..=500 {
        match f.rejection_probability(i as f64 * 0.1, &fine) {
            Ok(r) => sup = sup.max(r),
            Err(e) => return t.failed(S, "Cauchy rejection", e),
        }
    }
    t.at_most(S, "Cauchy RWMH: sup of R over [-50, 50] (< 1)", sup, 1.0 - 1e-12);
    let mut shortfall = f64::NEG_INFINITY;
    for n in [5.0, 10.0, 50.0] {
        match f.tail_mass(n, &fine) {
            Ok(m) => shortfall = shortfall.max(cauchy_tail_bound(0.0, n) - m),
            Err(e) => return t.failed(S, "Cauchy tail mass", e),
        }
    }
    t.at_most(S, "Cauchy tail bound minus tail mass", shortfall, 0.0);
    match f.rejection_probability(0.0, &fine) {
        Ok(r0) => t.at_most(S, "Cauchy R(0) vs 1 - pi/4", (r0 - (1.0 - PI / 4.0)).abs(), 1e-10),
        Err(e) => t.failed(S, "Cauchy R(0)", e),
    }
}

fn coupling(t: &mut Table, replicas: usize, seed: u64) {
    const S: &str = "coupling";
    match coupling_meeting_times(2.0, replicas, seed) {
        Ok(times) => {
            let z = meeting_time_survival(&times, 2.0, 10)
                .iter()
                .map(|p| p.z_score(replicas).abs())
                .fold(0.0, f64::max);
            t.at_most(S, "w* = 2: max |z| of P(T >= n), n <= 10", z, 3.0);
        }
        Err(e) => t.failed(S, "meeting times", e),
    }

    let m = random_model_upto(6, seed, 0);
    let discrete_replicas = replicas.min(20_000);
    match coupling_replicas_discrete(&m, m.len() - 1, discrete_replicas, seed) {
        Ok(times) => {
            let z = meeting_time_survival(&times, m.wstar(), 10)
                .iter()
                .map(|p| p.z_score(discrete_replicas).abs())
                .fold(0.0, f64::max);
            t.at_most(S, "discrete coupling: max |z|, n <= 10", z, 3.0);
            match exact_tv(&build_kernel(&m), m.target(), 10) {
                Ok(traj) => {
                    let r = 1.0 - 1.0 / m.wstar();
                    let excess = (0..=10)
                        .map(|s| traj.d_max[s] - r.powi(s as i32))
                        .fold(f64::NEG_INFINITY, f64::max);
                    t.at_most(S, "exact d_max minus P(T > t)", excess, 1e-12);
                }
                Err(e) => t.failed(S, "exact TV", e),
            }
        }
        Err(e) => t.failed(S, "discrete coupling", e),
    }

    let chain = three_point_chain();
    match empirical_tv_kernel(&chain, &[1.0 / 3.0; 3], 1, 3, replicas.max(1000), seed) {
        Ok(est) => t.at_most(
            S,
            "three-point chain TV(x_2, 3) vs 4/27, in stderr",
            (est.estimate - 4.0 / 27.0).abs() / est.stderr.max(1e-300),
            3.0,
        ),
        Err(e) => t.failed(S, "empirical TV", e),
    }
}
