use imh_core::cases::CaseModel;
use imh_core::measures::{compute_wstar, default_budget};
use imh_core::modelspec::load_model;
use imh_core::samplers::{
    coupling_meeting_times, coupling_replicas_discrete, meeting_time_histogram, meeting_time_survival, run_imh,
    run_imh_discrete, run_kernel, ChainRun,
};
use serde_json::json;

use crate::output::{num, Csv, Meta, OutDir};
use crate::{CoupleArgs, Failure, SimulateArgs};

const HISTOGRAM_BINS: usize = 50;

fn finite_start(x0: Option<f64>, default: usize) -> Result<usize, Failure> {
    match x0 {
        None => Ok(default),
        Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
        Some(x) => Err(Failure::Model(format!("--x0 {x} is not a state index"))),
    }
}

fn write_run<S>(run: &ChainRun<S>, a: &SimulateArgs, out: &OutDir, fmt: impl Fn(&S) -> String) -> Result<(), Failure> {
    let first = run.states.first().map(&fmt).unwrap_or_default();
    let last = run.states.last().map(&fmt).unwrap_or_default();
    out.json(
        "simulate.json",
        json!({
            "model": run.model_id,
            "seed": run.seed,
            "steps": run.steps(),
            "acceptance_rate": run.acceptance_rate(),
            "x0": first,
            "final_state": last,
        }),
    )?;
    if a.trajectory {
        let mut csv = Csv::new(&["step", "state", "accepted"]);
        csv.note(format!("model: {}", run.model_id));
        csv.note("accepted refers to the move out of the state on that row");
        for (i, s) in run.states.iter().enumerate() {
            let acc = run
                .accepted
                .get(i)
                .map(|b| u8::from(*b).to_string())
                .unwrap_or_default();
            csv.row(vec![i.to_string(), fmt(s), acc]);
        }
        out.csv("trajectory.csv", &csv)?;
    }
    println!("{} steps, acceptance rate {:.4}", run.steps(), run.acceptance_rate());
    Ok(())
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let loaded = load_model(&a.model.model)?;
    let out = OutDir::create(&a.out.out, Meta::from_env(Some(a.seed)))?;
    match &loaded.model {
        CaseModel::Discrete(m) => {
            let x0 = finite_start(a.x0, m.user_index(0))?;
            let mut run = run_imh_discrete(m, x0, a.steps, a.seed)?;
            run.model_id = loaded.id.clone();
            write_run(&run, a, &out, |s| s.to_string())
        }
        CaseModel::Chain { kernel, .. } => {
            let x0 = finite_start(a.x0, 0)?;
            let mut run = run_kernel(kernel, x0, a.steps, a.seed)?;
            run.model_id = loaded.id.clone();
            write_run(&run, a, &out, |s| s.to_string())
        }
        CaseModel::General(m) => {
            let x0 = match a.x0 {
                Some(x) => vec![x],
                None => compute_wstar(m, default_budget(m.support()))?
                    .argmax
                    .ok_or_else(|| Failure::Model("no maximizer of the weight is known; pass --x0".into()))?,
            };
            let mut run = run_imh(m, &x0, a.steps, a.seed)?;
            run.model_id = loaded.id.clone();
            write_run(&run, a, &out, |s| {
                s.iter().map(|x| num(*x)).collect::<Vec<_>>().join(";")
            })
        }
        CaseModel::Rwmh(f) => {
            let mut run = f.simulate(a.x0.unwrap_or(0.0), a.steps, a.seed)?;
            run.model_id = loaded.id.clone();
            write_run(&run, a, &out, |s| num(*s))
        }
    }
}

pub fn couple(a: &CoupleArgs) -> Result<(), Failure> {
    let loaded = load_model(&a.model.model)?;
    let (times, wstar) = match &loaded.model {
        CaseModel::Discrete(m) => {
            let x0 = a.x0.unwrap_or(m.len() - 1);
            if x0 >= m.len() {
                return Err(Failure::Model(format!(
                    "--x0 {x0} is not a state of a {}-state model",
                    m.len()
                )));
            }
            (coupling_replicas_discrete(m, x0, a.replicas, a.seed)?, m.wstar())
        }
        CaseModel::General(m) => {
            let s = compute_wstar(m, default_budget(m.support()))?;
            (coupling_meeting_times(s.wstar, a.replicas, a.seed)?, s.wstar)
        }
        _ => return Err(Failure::Model("coupling needs an IMH model".into())),
    };
    if times.is_empty() {
        return Err(Failure::Model("--replicas must be positive".into()));
    }
    let out = OutDir::create(&a.out.out, Meta::from_env(Some(a.seed)))?;
    let survival = meeting_time_survival(&times, wstar, a.n_max);
    let mut csv = Csv::new(&["n", "empirical", "stderr", "exact", "z"]);
    csv.note(format!("model: {}", loaded.id));
    csv.note("P(T >= n) against (1 - 1/w*)^(n - 1)");
    for p in &survival {
        csv.row(vec![
            p.n.to_string(),
            num(p.empirical),
            num(p.stderr),
            num(p.exact),
            num(p.z_score(times.len())),
        ]);
    }
    out.csv("survival.csv", &csv)?;
    let mean = times.iter().sum::<usize>() as f64 / times.len() as f64;
    let max_z = survival
        .iter()
        .map(|p| p.z_score(times.len()).abs())
        .fold(0.0, f64::max);
    out.json(
        "couple.json",
        json!({
            "model": loaded.id,
            "seed": a.seed,
            "replicas": times.len(),
            "wstar": wstar,
            "convention": "T is the first step at which the chains coincide; P(T >= n + 1) = (1 - 1/w*)^n",
            "mean_meeting_time": mean,
            "exact_mean_meeting_time": wstar,
            "histogram": meeting_time_histogram(&times, HISTOGRAM_BINS),
            "survival": serde_json::to_value(&survival).expect("serializable"),
            "max_abs_z": max_z,
        }),
    )?;
    println!(
        "mean meeting time {mean:.4} (exact {}), max |z| over n <= {}: {max_z:.3}",
        num(wstar),
        a.n_max
    );
    Ok(())
}
