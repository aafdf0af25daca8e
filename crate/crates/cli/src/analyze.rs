use imh_core::cases::{CaseModel, RwmhFixture};
use imh_core::discrete::{
    build_kernel, exact_tv, liu_spectrum, per_point_rate_discrete, rate_bounds_discrete, TransitionMatrix,
};
use imh_core::fit::fit_tail_rate;
use imh_core::general::{
    per_point_rate_general, rate_report, steps_to_eps, weight_cdf_pair, RateReport, SpeedKind, StepsToEps, DEFAULT_EPS,
};
use imh_core::measures::{DiscreteModel, GeneralModel};
use imh_core::modelspec::{load_model, LoadedModel};
use imh_core::quadrature::QuadratureConfig;
use serde_json::{json, Value};

use crate::output::{num, opt, Csv, Meta, OutDir};
use crate::{AnalyzeArgs, Failure, ModelArg, OutArgs};

const RWMH_GRID_HALF_WIDTH: f64 = 50.0;
const RWMH_GRID_STEP: f64 = 0.5;

pub fn analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let loaded = load_model(&a.model.model)?;
    let out = OutDir::create(&a.out.out, Meta::from_env(None))?;
    match &loaded.model {
        CaseModel::Discrete(m) => analyze_discrete(m, a, &loaded, &out),
        CaseModel::General(m) => analyze_general(m, a, &loaded, &out),
        CaseModel::Chain { kernel, stationary } => analyze_chain(kernel, stationary, a, &loaded, &out),
        CaseModel::Rwmh(f) => analyze_rwmh(f, &loaded, &out),
    }
}

fn eps_list(a: &AnalyzeArgs) -> Vec<f64> {
    if a.epsilon.is_empty() {
        DEFAULT_EPS.to_vec()
    } else {
        a.epsilon.clone()
    }
}

fn steps_table(report: &mut RateReport, eps: &[f64]) -> Result<(), Failure> {
    if let Some(rate) = report.exact_rate {
        report.steps_to_eps = eps
            .iter()
            .map(|&e| steps_to_eps(rate, e))
            .collect::<Result<Vec<_>, _>>()?;
    }
    Ok(())
}

fn print_summary(report: &RateReport) {
    match (report.wstar, report.exact_rate) {
        (Some(w), Some(r)) => {
            println!("w* = {}  rate = {}  ({:?})", num(w), num(r), report.speed_kind);
            for StepsToEps {
                eps,
                fractional,
                ceiling,
            } in &report.steps_to_eps
            {
                println!("  eps = {}: {:.2} steps (ceil {ceiling})", num(*eps), fractional);
            }
        }
        _ => println!("not geometrically ergodic"),
    }
}

fn base_report(loaded: &LoadedModel, kind: &str, report: Option<&RateReport>) -> Value {
    let mut v = match report {
        Some(r) => serde_json::to_value(r).expect("serializable"),
        None => json!({}),
    };
    v["model"] = json!(loaded.id);
    v["kind"] = json!(kind);
    v["truths"] = serde_json::to_value(&loaded.truths).expect("serializable");
    v
}

fn analyze_discrete(m: &DiscreteModel, a: &AnalyzeArgs, loaded: &LoadedModel, out: &OutDir) -> Result<(), Failure> {
    let mut report = RateReport::from_discrete(m)?;
    steps_table(&mut report, &eps_list(a))?;
    let sandwich = rate_bounds_discrete(m, a.horizon)?;
    let traj = &sandwich.trajectory;
    let d_fit = fit_tail_rate(&traj.log_d_max).ok();
    let rates = if a.horizon >= 20 {
        Some(per_point_rate_discrete(m, a.horizon)?)
    } else {
        None
    };
    let spectrum = liu_spectrum(m).ok();

    let mut tv = Csv::new(&["n", "tv", "lower", "upper", "rate_fit"]);
    tv.note(format!("model: {}", loaded.id));
    tv.note("tv is d_max(n); lower and upper are (1 - pi_1)(1 - 1/w*)^n and (1 - 1/w*)^n");
    for t in 0..=a.horizon {
        tv.row(vec![
            t.to_string(),
            num(traj.d_max[t]),
            num(sandwich.lower[t]),
            num(sandwich.upper[t]),
            opt(d_fit.map(|f| f.rate)),
        ]);
    }
    out.csv("tv.csv", &tv)?;

    let mut states = Csv::new(&["t", "state", "tv", "lower", "upper"]);
    states.note(format!("model: {}", loaded.id));
    states.note("lower is (pi_min |f_1(x)| / 2)(1 - 1/w*)^t when the closed-form spectrum exists");
    let pi_min = m.min_target();
    for user in 0..m.len() {
        let c = m.canonical_index(user).expect("index in range");
        let c_pi = spectrum
            .as_ref()
            .filter(|s| s.eigenvalues.len() > 1)
            .map(|s| s.f(1, c).abs());
        for t in 0..=a.horizon {
            let lower = c_pi.map(|c| pi_min * c / 2.0 * sandwich.rate.powi(t as i32));
            states.row(vec![
                t.to_string(),
                user.to_string(),
                num(traj.tv(c, t)),
                opt(lower),
                num(sandwich.upper[t]),
            ]);
        }
    }
    out.csv("tv_states.csv", &states)?;

    let mut v = base_report(loaded, "discrete", Some(&report));
    v["horizon"] = json!(a.horizon);
    v["d_max_fit"] = serde_json::to_value(d_fit).expect("serializable");
    if let Some(r) = &rates {
        let per_state: Vec<Value> = r
            .states
            .iter()
            .map(|s| {
                json!({
                    "state": s.user_state,
                    "rate": s.fit.rate,
                    "c_pi": s.c_pi,
                    "spectral_chain_holds": s.spectral_chain_holds,
                })
            })
            .collect();
        v["per_state"] = json!(per_state);
        v["notes"] = json!(r.notes);
    }
    out.json("report.json", v)?;
    print_summary(&report);
    Ok(())
}

/// The maximizer when known, otherwise 0 pulled into the support.
fn default_point(m: &GeneralModel, argmax: Option<&Vec<f64>>) -> f64 {
    if let Some(x) = argmax.and_then(|a| a.first()) {
        return *x;
    }
    let (lo, hi) = m.bounds_1d().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    0.0f64.clamp(lo, hi)
}

fn analyze_general(m: &GeneralModel, a: &AnalyzeArgs, loaded: &LoadedModel, out: &OutDir) -> Result<(), Failure> {
    let cfg = QuadratureConfig::default();
    let mut report = rate_report(m, &cfg)?;
    if report.speed_kind == SpeedKind::NotGeometric {
        out.json("report.json", base_report(loaded, "general", Some(&report)))?;
        return Err(Failure::Model(format!(
            "not geometrically ergodic: {}",
            report.warnings.join("; ")
        )));
    }
    steps_table(&mut report, &eps_list(a))?;

    let mut tv = Csv::new(&["x", "n", "tv", "lower", "upper", "rate_fit"]);
    tv.note(format!("model: {}", loaded.id));
    tv.note("lower is R(x)^n and upper is (1 - 1/w*)^n");
    if m.bounds_1d().is_some() {
        let pair = weight_cdf_pair(m, &cfg)?;
        let points = if a.points.is_empty() {
            vec![default_point(m, pair.summary().argmax.as_ref())]
        } else {
            a.points.clone()
        };
        for &x in &points {
            let p = per_point_rate_general(m, &pair, x, a.n_max, &cfg)?;
            for (n, t) in p.tv.iter().enumerate() {
                tv.row(vec![
                    num(x),
                    n.to_string(),
                    num(*t),
                    num(p.rejection.powi(n as i32)),
                    num(p.predicted.powi(n as i32)),
                    num(p.rate()),
                ]);
            }
            report.per_point.push(p);
        }
    } else {
        report
            .warnings
            .push("TV tables need a one-dimensional model; only the rate is reported".into());
    }
    out.csv("tv.csv", &tv)?;
    out.json("report.json", base_report(loaded, "general", Some(&report)))?;
    print_summary(&report);
    for p in &report.per_point {
        println!(
            "  x = {}: fitted rate {:.6} in [R(x), 1 - 1/w*] = [{:.6}, {:.6}]",
            num(p.x),
            p.rate(),
            p.rejection,
            p.predicted
        );
    }
    Ok(())
}

fn analyze_chain(
    kernel: &TransitionMatrix,
    stationary: &[f64],
    a: &AnalyzeArgs,
    loaded: &LoadedModel,
    out: &OutDir,
) -> Result<(), Failure> {
    let traj = exact_tv(kernel, stationary, a.horizon)?;
    let d_fit = fit_tail_rate(&traj.log_d_max).ok();
    let mut tv = Csv::new(&["n", "tv", "lower", "upper", "rate_fit"]);
    tv.note(format!("model: {}", loaded.id));
    tv.note("not an IMH kernel: no envelopes");
    for t in 0..=a.horizon {
        tv.row(vec![
            t.to_string(),
            num(traj.d_max[t]),
            String::new(),
            String::new(),
            opt(d_fit.map(|f| f.rate)),
        ]);
    }
    out.csv("tv.csv", &tv)?;
    let mut states = Csv::new(&["t", "state", "tv", "lower", "upper"]);
    states.note(format!("model: {}", loaded.id));
    for x in 0..kernel.n() {
        for t in 0..=a.horizon {
            states.row(vec![
                t.to_string(),
                x.to_string(),
                num(traj.tv(x, t)),
                String::new(),
                String::new(),
            ]);
        }
    }
    out.csv("tv_states.csv", &states)?;
    let per_state: Vec<Value> = traj
        .log_per_state
        .iter()
        .enumerate()
        .map(|(x, logs)| json!({"state": x, "rate": fit_tail_rate(logs).ok().map(|f| f.rate)}))
        .collect();
    let mut v = base_report(loaded, "chain", None);
    v["horizon"] = json!(a.horizon);
    v["d_max_fit"] = serde_json::to_value(d_fit).expect("serializable");
    v["per_state"] = json!(per_state);
    out.json("report.json", v)?;
    println!("fitted rate of d_max: {}", opt(d_fit.map(|f| f.rate)));
    Ok(())
}

fn analyze_rwmh(f: &RwmhFixture, loaded: &LoadedModel, out: &OutDir) -> Result<(), Failure> {
    let cfg = QuadratureConfig::default().with_abs_tol(1e-13);
    let steps = (2.0 * RWMH_GRID_HALF_WIDTH / RWMH_GRID_STEP).round() as i64;
    let mut csv = Csv::new(&["x", "rejection"]);
    csv.note(format!("model: {}", loaded.id));
    let mut sup = 0.0f64;
    for i in 0..=steps {
        let x = -RWMH_GRID_HALF_WIDTH + i as f64 * RWMH_GRID_STEP;
        let r = f.rejection_probability(x, &cfg)?;
        sup = sup.max(r);
        csv.row(vec![num(x), num(r)]);
    }
    out.csv("rejection.csv", &csv)?;
    let tails: Vec<Value> = [5.0, 10.0, 50.0]
        .iter()
        .map(|&n| f.tail_mass(n, &cfg).map(|m| json!({"n": n, "mass": m})))
        .collect::<Result<_, _>>()?;
    let mut v = base_report(loaded, "rwmh", None);
    v["rejection_grid"] = json!({
        "lower": -RWMH_GRID_HALF_WIDTH,
        "upper": RWMH_GRID_HALF_WIDTH,
        "step": RWMH_GRID_STEP,
        "sup": sup,
    });
    v["tail_mass"] = json!(tails);
    out.json("report.json", v)?;
    println!("sup of R over the grid: {}", num(sup));
    Ok(())
}

pub fn spectrum(model: &ModelArg, out: &OutArgs) -> Result<(), Failure> {
    let loaded = load_model(&model.model)?;
    let CaseModel::Discrete(m) = &loaded.model else {
        return Err(Failure::Model("spectrum needs a discrete IMH model".into()));
    };
    let s = liu_spectrum(m)?;
    let kernel = build_kernel(m);
    let dir = OutDir::create(&out.out, Meta::from_env(None))?;
    let mut csv = Csv::new(&["k", "eigenvalue", "state", "f"]);
    csv.note(format!("model: {}", loaded.id));
    csv.note("f is the k-th eigenvector scaled to unit L2(pi) norm; state is the input index");
    for k in 1..s.eigenvalues.len() {
        for user in 0..m.len() {
            let c = m.canonical_index(user).expect("index in range");
            csv.row(vec![k.to_string(), num(s.lambda(k)), user.to_string(), num(s.f(k, c))]);
        }
    }
    dir.csv("spectrum.csv", &csv)?;
    let to_user = |v: &Vec<f64>| -> Vec<f64> {
        (0..m.len())
            .map(|u| v[m.canonical_index(u).expect("index in range")])
            .collect()
    };
    let v = json!({
        "model": loaded.id,
        "wstar": m.wstar(),
        "eigenvalues": s.eigenvalues,
        "eigenvectors": s.normalized.iter().map(to_user).collect::<Vec<_>>(),
        "eigen_residual": s.eigen_residual(&kernel),
        "orthogonality": s.orthogonality(m.target()),
    });
    dir.json("spectrum.json", v)?;
    println!(
        "eigenvalues: {}",
        s.eigenvalues.iter().map(|l| num(*l)).collect::<Vec<_>>().join(", ")
    );
    Ok(())
}
