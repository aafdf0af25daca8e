//! Monte Carlo layer: MH and IMH samplers, the minorization coupling and
//! empirical TV estimates used to cross-check the exact modules.
//!
//! Every replica draws from its own counter-derived stream, so results do
//! not depend on how rayon schedules the work.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::{build_kernel, TransitionMatrix};
use crate::error::{Error, Result};
use crate::measures::{DiscreteModel, GeneralModel};
use crate::rng::{self, StreamRng};

/// Bootstrap resamples behind the standard error of an empirical TV.
const BOOTSTRAP: usize = 200;
/// Stream index reserved for the bootstrap.
const BOOTSTRAP_STREAM: u64 = u64::MAX;
/// Tolerance on negative residual-kernel entries before they count as a bug.
const RESIDUAL_TOL: f64 = 1e-14;

/// A simulated trajectory. `accepted[i]` records whether the move from
/// `states[i]` to `states[i + 1]` was an accepted proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRun<S> {
    pub states: Vec<S>,
    pub accepted: Vec<bool>,
    pub seed: u64,
    pub model_id: String,
}

impl<S> ChainRun<S> {
    pub fn steps(&self) -> usize {
        self.accepted.len()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }
}

/// A state-dependent proposal on the real line.
pub trait Proposal: Sync {
    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64;
    /// `ln q(from, to)`.
    fn log_density(&self, from: f64, to: f64) -> f64;
}

/// `U[x − h, x + h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformWalk {
    pub half_width: f64,
}

impl Proposal for UniformWalk {
    fn sample(&self, x: f64, rng: &mut dyn RngCore) -> f64 {
        x + self.half_width * (2.0 * rng.random::<f64>() - 1.0)
    }

    fn log_density(&self, from: f64, to: f64) -> f64 {
        if (to - from).abs() <= self.half_width {
            -(2.0 * self.half_width).ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::InvalidModel("a run needs at least one step".into()));
    }
    Ok(())
}

/// Metropolis–Hastings with acceptance
/// `min(1, q(x′, x) π(x′) / (q(x, x′) π(x)))`.
pub fn run_mh(
    target_log: &(dyn Fn(f64) -> f64 + Sync),
    proposal: &dyn Proposal,
    x0: f64,
    steps: usize,
    seed: u64,
    model_id: &str,
) -> Result<ChainRun<f64>> {
    check_steps(steps)?;
    let mut lp = target_log(x0);
    if lp == f64::NEG_INFINITY || lp.is_nan() {
        return Err(Error::ZeroDensityAtStart(vec![x0]));
    }
    let mut rng = rng::stream(seed, 0);
    let mut x = x0;
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepted = Vec::with_capacity(steps);
    states.push(x);
    for _ in 0..steps {
        let y = proposal.sample(x, &mut rng);
        let ly = target_log(y);
        let log_a = ly + proposal.log_density(y, x) - lp - proposal.log_density(x, y);
        let u: f64 = rng.random();
        let ok = ly > f64::NEG_INFINITY && (log_a >= 0.0 || u.ln() < log_a);
        if ok {
            x = y;
            lp = ly;
        }
        states.push(x);
        accepted.push(ok);
    }
    Ok(ChainRun {
        states,
        accepted,
        seed,
        model_id: model_id.to_string(),
    })
}

/// IMH on a continuous model: acceptance `min(1, w(x′)/w(x))`.
pub fn run_imh(model: &GeneralModel, x0: &[f64], steps: usize, seed: u64) -> Result<ChainRun<Vec<f64>>> {
    check_steps(steps)?;
    let mut lw = match model.log_weight(x0) {
        Ok(l) if l > f64::NEG_INFINITY => l,
        Ok(_) => return Err(Error::ZeroDensityAtStart(x0.to_vec())),
        Err(e) => return Err(e),
    };
    let mut rng = rng::stream(seed, 0);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepted = Vec::with_capacity(steps);
    states.push(x.clone());
    for _ in 0..steps {
        let y = model.sample_proposal(&mut rng);
        let ly = model.log_weight(&y).unwrap_or(f64::NEG_INFINITY);
        let u: f64 = rng.random();
        let ok = ly > f64::NEG_INFINITY && (ly >= lw || u.ln() < ly - lw);
        if ok {
            x = y;
            lw = ly;
        }
        states.push(x.clone());
        accepted.push(ok);
    }
    Ok(ChainRun {
        states,
        accepted,
        seed,
        model_id: model.name().to_string(),
    })
}

fn canonical_start(model: &DiscreteModel, user: usize) -> Result<usize> {
    model
        .canonical_index(user)
        .ok_or_else(|| Error::PointOutsideSupport(vec![user as f64]))
}

fn proposal_index(model: &DiscreteModel) -> WeightedIndex<f64> {
    WeightedIndex::new(model.proposal()).expect("validated proposal")
}

fn target_index(model: &DiscreteModel) -> WeightedIndex<f64> {
    WeightedIndex::new(model.target()).expect("validated target")
}

/// One IMH path in canonical indices. A state of weight 0 accepts every
/// proposal.
fn imh_path(
    model: &DiscreteModel,
    p: &WeightedIndex<f64>,
    x0: usize,
    steps: usize,
    rng: &mut StreamRng,
) -> (Vec<usize>, Vec<bool>) {
    let w = model.weights();
    let mut x = x0;
    let mut states = Vec::with_capacity(steps + 1);
    let mut accepted = Vec::with_capacity(steps);
    states.push(x);
    for _ in 0..steps {
        let y = p.sample(rng);
        let u: f64 = rng.random();
        let ok = w[y] >= w[x] || u * w[x] < w[y];
        if ok {
            x = y;
        }
        states.push(x);
        accepted.push(ok);
    }
    (states, accepted)
}

/// IMH on a finite model. States are reported in the model's input order.
pub fn run_imh_discrete(model: &DiscreteModel, x0: usize, steps: usize, seed: u64) -> Result<ChainRun<usize>> {
    check_steps(steps)?;
    let start = canonical_start(model, x0)?;
    let mut rng = rng::stream(seed, 0);
    let (states, accepted) = imh_path(model, &proposal_index(model), start, steps, &mut rng);
    Ok(ChainRun {
        states: states.into_iter().map(|s| model.user_index(s)).collect(),
        accepted,
        seed,
        model_id: "discrete".into(),
    })
}

fn row_samplers(kernel: &TransitionMatrix) -> Vec<WeightedIndex<f64>> {
    (0..kernel.n())
        .map(|i| WeightedIndex::new(kernel.row(i)).expect("stochastic row"))
        .collect()
}

/// Simulate an arbitrary finite chain; `accepted` marks steps that changed state.
pub fn run_kernel(kernel: &TransitionMatrix, x0: usize, steps: usize, seed: u64) -> Result<ChainRun<usize>> {
    check_steps(steps)?;
    if x0 >= kernel.n() {
        return Err(Error::PointOutsideSupport(vec![x0 as f64]));
    }
    let rows = row_samplers(kernel);
    let mut rng = rng::stream(seed, 0);
    let (states, accepted) = kernel_path(&rows, x0, steps, &mut rng);
    Ok(ChainRun {
        states,
        accepted,
        seed,
        model_id: "kernel".into(),
    })
}

fn kernel_path(rows: &[WeightedIndex<f64>], x0: usize, steps: usize, rng: &mut StreamRng) -> (Vec<usize>, Vec<bool>) {
    let mut x = x0;
    let mut states = vec![x];
    let mut moved = Vec::with_capacity(steps);
    for _ in 0..steps {
        let y = rows[x].sample(rng);
        moved.push(y != x);
        x = y;
        states.push(x);
    }
    (states, moved)
}

/// Outcome of the minorization coupling. `meeting_time` is the first step
/// at which the chains coincide, so `P(T ≥ n + 1) = (1 − 1/w⋆)ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub meeting_time: usize,
    /// `(Φₙ, Φ̃ₙ)` for `n < T` in input order; empty for continuous models,
    /// where only the meeting time is simulated.
    pub pre_meeting: Vec<(usize, usize)>,
    pub seed: u64,
}

/// `q_res(x, ·) = (P(x, ·) − π/w⋆) / (1 − 1/w⋆)` in canonical order.
///
/// Entries below `−1e−14` mean the minorization `P(x, ·) ≥ π/w⋆` failed,
/// which would be a bug in the kernel. When `w⋆ = 1` the coin always lands
/// heads and the kernel itself is returned.
pub fn residual_kernel(model: &DiscreteModel) -> Result<DMatrix<f64>> {
    let p = build_kernel(model);
    let wstar = model.wstar();
    let n = model.len();
    if wstar <= 1.0 {
        return Ok(p.as_matrix().clone());
    }
    let c = 1.0 - 1.0 / wstar;
    let pi = model.target();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = (p.get(i, j) - pi[j] / wstar) / c;
            if v < -RESIDUAL_TOL {
                return Err(Error::ResidualNegative { state: i, value: v });
            }
            q[(i, j)] = v.max(0.0);
        }
        let s: f64 = q.row(i).sum();
        for j in 0..n {
            q[(i, j)] /= s;
        }
    }
    Ok(q)
}

/// Run the coupling from `x0` (input index) against a chain started at π.
///
/// Each step flips a coin with head probability `1/w⋆`; on heads both chains
/// move to a common draw from π and stay together, on tails each moves
/// independently by the residual kernel.
pub fn run_coupling_discrete(model: &DiscreteModel, x0: usize, seed: u64) -> Result<CouplingRun> {
    run_coupling_discrete_stream(model, x0, seed, 0)
}

fn run_coupling_discrete_stream(model: &DiscreteModel, x0: usize, seed: u64, stream: u64) -> Result<CouplingRun> {
    let start = canonical_start(model, x0)?;
    let q = residual_kernel(model)?;
    let rows: Vec<WeightedIndex<f64>> = (0..model.len())
        .map(|i| WeightedIndex::new(q.row(i).iter().copied()).expect("residual row"))
        .collect();
    let pi = target_index(model);
    let mut rng = rng::stream(seed, stream);
    let head = 1.0 / model.wstar();
    let (mut x, mut y) = (start, pi.sample(&mut rng));
    let mut pre = Vec::new();
    let mut n = 0;
    loop {
        pre.push((model.user_index(x), model.user_index(y)));
        n += 1;
        if rng.random::<f64>() < head {
            break;
        }
        x = rows[x].sample(&mut rng);
        y = rows[y].sample(&mut rng);
    }
    Ok(CouplingRun {
        meeting_time: n,
        pre_meeting: pre,
        seed,
    })
}

/// Meeting times of `replicas` full discrete couplings from `x0`.
pub fn coupling_replicas_discrete(model: &DiscreteModel, x0: usize, replicas: usize, seed: u64) -> Result<Vec<usize>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|i| run_coupling_discrete_stream(model, x0, seed, i).map(|r| r.meeting_time))
        .collect()
}

/// Steps until the first head with probability `1/w⋆`.
pub fn meeting_time(wstar: f64, rng: &mut dyn RngCore) -> usize {
    let head = 1.0 / wstar;
    let mut n = 1;
    while rng.random::<f64>() >= head {
        n += 1;
    }
    n
}

/// The coupling for a continuous model. Residual trajectories do not affect
/// `T`, so only the coin flips are simulated.
pub fn run_coupling_general(wstar: f64, seed: u64) -> Result<CouplingRun> {
    if !(wstar.is_finite() && wstar >= 1.0) {
        return Err(Error::InvalidModel(format!(
            "coupling needs a finite w* >= 1, got {wstar}"
        )));
    }
    let mut rng = rng::stream(seed, 0);
    Ok(CouplingRun {
        meeting_time: meeting_time(wstar, &mut rng),
        pre_meeting: Vec::new(),
        seed,
    })
}

/// Meeting times of `replicas` independent couplings; replica `i` uses
/// stream `i` of `seed`.
pub fn coupling_meeting_times(wstar: f64, replicas: usize, seed: u64) -> Result<Vec<usize>> {
    if !(wstar.is_finite() && wstar >= 1.0) {
        return Err(Error::InvalidModel(format!(
            "coupling needs a finite w* >= 1, got {wstar}"
        )));
    }
    Ok((0..replicas as u64)
        .into_par_iter()
        .map(|i| meeting_time(wstar, &mut rng::stream(seed, i)))
        .collect())
}

/// Empirical against exact `P(T ≥ n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPoint {
    pub n: usize,
    pub empirical: f64,
    pub stderr: f64,
    /// `(1 − 1/w⋆)^{n−1}`.
    pub exact: f64,
}

impl SurvivalPoint {
    /// Distance from the exact value in standard errors of the exact law.
    pub fn z_score(&self, replicas: usize) -> f64 {
        let se = (self.exact * (1.0 - self.exact) / replicas as f64).sqrt();
        if se == 0.0 {
            return if self.empirical == self.exact {
                0.0
            } else {
                f64::INFINITY
            };
        }
        (self.empirical - self.exact) / se
    }
}

pub fn meeting_time_survival(times: &[usize], wstar: f64, n_max: usize) -> Vec<SurvivalPoint> {
    let m = times.len() as f64;
    (1..=n_max)
        .map(|n| {
            let empirical = times.iter().filter(|t| **t >= n).count() as f64 / m;
            SurvivalPoint {
                n,
                empirical,
                stderr: (empirical * (1.0 - empirical) / m).sqrt(),
                exact: (1.0 - 1.0 / wstar).powi(n as i32 - 1),
            }
        })
        .collect()
}

/// Histogram `counts[k]` of meeting times equal to `k + 1`, truncated at
/// `max_bin` with the overflow in the last bin.
pub fn meeting_time_histogram(times: &[usize], max_bin: usize) -> Vec<usize> {
    let mut h = vec![0; max_bin.max(1)];
    for &t in times {
        let k = (t.max(1) - 1).min(h.len() - 1);
        h[k] += 1;
    }
    h
}

/// `½‖μ̂ − π‖₁` with a bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub t: usize,
    pub replicas: usize,
}

fn tv_of_counts(counts: &[usize], total: usize, pi: &[f64]) -> f64 {
    0.5 * counts
        .iter()
        .zip(pi)
        .map(|(c, p)| (*c as f64 / total as f64 - p).abs())
        .sum::<f64>()
}

fn estimate_from_finals(finals: &[usize], pi: &[f64], t: usize, seed: u64) -> TvEstimate {
    let k = pi.len();
    let m = finals.len();
    let mut counts = vec![0usize; k];
    for &s in finals {
        counts[s] += 1;
    }
    let estimate = tv_of_counts(&counts, m, pi);
    let mut rng = rng::stream(seed, BOOTSTRAP_STREAM);
    let boots: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let mut c = vec![0usize; k];
            for _ in 0..m {
                c[finals[rng.random_range(0..m)]] += 1;
            }
            tv_of_counts(&c, m, pi)
        })
        .collect();
    let mean = boots.iter().sum::<f64>() / BOOTSTRAP as f64;
    let var = boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (BOOTSTRAP - 1) as f64;
    TvEstimate {
        estimate,
        stderr: var.sqrt(),
        t,
        replicas: m,
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < 1000 {
        return Err(Error::InvalidModel(format!(
            "empirical TV needs at least 1000 replicas, got {replicas}"
        )));
    }
    Ok(())
}

/// Empirical TV after `t` IMH steps from `x0` (input index).
pub fn empirical_tv(model: &DiscreteModel, x0: usize, t: usize, replicas: usize, seed: u64) -> Result<TvEstimate> {
    check_replicas(replicas)?;
    let start = canonical_start(model, x0)?;
    let p = proposal_index(model);
    let finals: Vec<usize> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            *imh_path(model, &p, start, t, &mut rng).0.last().expect("nonempty")
        })
        .collect();
    Ok(estimate_from_finals(&finals, model.target(), t, seed))
}

/// Empirical TV after `t` steps of an arbitrary finite chain.
pub fn empirical_tv_kernel(
    kernel: &TransitionMatrix,
    pi: &[f64],
    x0: usize,
    t: usize,
    replicas: usize,
    seed: u64,
) -> Result<TvEstimate> {
    check_replicas(replicas)?;
    if x0 >= kernel.n() || pi.len() != kernel.n() {
        return Err(Error::InvalidModel(
            "start state or stationary vector does not fit the kernel".into(),
        ));
    }
    let rows = row_samplers(kernel);
    let finals: Vec<usize> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i);
            *kernel_path(&rows, x0, t, &mut rng).0.last().expect("nonempty")
        })
        .collect();
    Ok(estimate_from_finals(&finals, pi, t, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::exact_tv;
    use crate::measures::DensitySpec;

    fn phi1(k: usize) -> DiscreteModel {
        let mut target = vec![1.0 / k as f64; k];
        target.extend(vec![0.0; k]);
        DiscreteModel::new(target, vec![0.5 / k as f64; 2 * k]).unwrap()
    }

    fn three_point() -> TransitionMatrix {
        let t = 1.0 / 3.0;
        TransitionMatrix::from_rows(&[vec![t, t, t], vec![t, 2.0 * t, 0.0], vec![t, 0.0, 2.0 * t]]).unwrap()
    }

    #[test]
    fn runs_are_reproducible() {
        let m = DiscreteModel::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]).unwrap();
        let a = run_imh_discrete(&m, 2, 500, 11).unwrap();
        let b = run_imh_discrete(&m, 2, 500, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), a.accepted.len() + 1);
        assert_ne!(a.states, run_imh_discrete(&m, 2, 500, 12).unwrap().states);
        let c = coupling_meeting_times(2.0, 100, 5).unwrap();
        assert_eq!(c, coupling_meeting_times(2.0, 100, 5).unwrap());
    }

    #[test]
    fn identical_target_and_proposal_always_accepts() {
        let m = DiscreteModel::new(vec![0.25; 4], vec![0.25; 4]).unwrap();
        assert_eq!(run_imh_discrete(&m, 0, 1000, 3).unwrap().acceptance_rate(), 1.0);
        let g = GeneralModel::from_specs(
            "same",
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            DensitySpec::Normal { mean: 0.0, sd: 1.0 },
            None,
        )
        .unwrap();
        assert_eq!(run_imh(&g, &[0.3], 1000, 3).unwrap().acceptance_rate(), 1.0);
    }

    #[test]
    fn uniform_target_accepts_inside_support() {
        let target = |x: f64| {
            if x.abs() <= 1.0 {
                -(2f64).ln()
            } else {
                f64::NEG_INFINITY
            }
        };
        let run = run_mh(&target, &UniformWalk { half_width: 0.5 }, 0.0, 5000, 1, "u").unwrap();
        for (i, ok) in run.accepted.iter().enumerate() {
            let y_inside = run.states[i + 1].abs() <= 1.0;
            assert!(y_inside);
            if !ok {
                assert_eq!(run.states[i + 1], run.states[i]);
            }
        }
        assert!(run_mh(&target, &UniformWalk { half_width: 0.5 }, 3.0, 10, 1, "u").is_err());
    }

    #[test]
    fn acceptance_from_the_maximizer() {
        // w⋆ = 2 at x = 0; every proposal has w ≤ w⋆ so acceptance is E[w]/w⋆ = 1/2
        let g = GeneralModel::from_specs(
            "exponential",
            DensitySpec::Exponential { rate: 1.0 },
            DensitySpec::Exponential { rate: 0.5 },
            None,
        )
        .unwrap();
        let steps = 100_000;
        let mut rng = rng::stream(9, 0);
        let mut acc = 0usize;
        for _ in 0..steps {
            let y = g.sample_proposal(&mut rng);
            let a = (g.log_weight(&y).unwrap() - 2f64.ln()).exp();
            if rng.random::<f64>() < a {
                acc += 1;
            }
        }
        let rate = acc as f64 / steps as f64;
        let se = (0.25 / steps as f64).sqrt();
        assert!((rate - 0.5).abs() < 3.0 * se, "{rate}");
    }

    #[test]
    fn residual_kernel_mixture_identity() {
        for m in [
            phi1(3),
            DiscreteModel::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]).unwrap(),
        ] {
            let q = residual_kernel(&m).unwrap();
            let p = build_kernel(&m);
            let ws = m.wstar();
            for i in 0..m.len() {
                for j in 0..m.len() {
                    let mix = m.target()[j] / ws + (1.0 - 1.0 / ws) * q[(i, j)];
                    assert!((mix - p.get(i, j)).abs() < 1e-12);
                    assert!(q[(i, j)] >= -1e-14);
                }
            }
        }
    }

    #[test]
    fn discrete_coupling_meets_geometrically() {
        let m = phi1(3);
        let reps = 20_000;
        let times: Vec<usize> = (0..reps)
            .map(|i| run_coupling_discrete(&m, 4, i).unwrap().meeting_time)
            .collect();
        for p in meeting_time_survival(&times, 2.0, 8) {
            assert!(p.z_score(reps as usize).abs() < 4.0, "{p:?}");
        }
        let r = run_coupling_discrete(&m, 4, 3).unwrap();
        assert_eq!(r.pre_meeting.len(), r.meeting_time);
    }

    #[test]
    fn coupling_dominates_exact_tv() {
        let m = phi1(3);
        let times = coupling_meeting_times(m.wstar(), 100_000, 7).unwrap();
        let surv = meeting_time_survival(&times, m.wstar(), 11);
        let tv = exact_tv(&build_kernel(&m), m.target(), 10).unwrap();
        for (t, s) in surv.iter().enumerate().take(11).skip(1) {
            // P(T ≥ t + 1) bounds TV after t steps
            let bound = s.empirical + 3.0 * s.stderr;
            assert!(tv.d_max[t] <= bound + 1e-12, "t={t}");
        }
    }

    #[test]
    fn histogram_and_mean() {
        let times = coupling_meeting_times(2.0, 50_000, 1).unwrap();
        let mean = times.iter().sum::<usize>() as f64 / times.len() as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0f64 / 50_000.0).sqrt());
        let h = meeting_time_histogram(&times, 5);
        assert_eq!(h.iter().sum::<usize>(), times.len());
    }

    #[test]
    fn empirical_tv_three_point() {
        let k = three_point();
        let pi = [1.0 / 3.0; 3];
        let e = empirical_tv_kernel(&k, &pi, 1, 3, 100_000, 21).unwrap();
        assert!((e.estimate - 4.0 / 27.0).abs() < 3.0 * e.stderr, "{e:?}");
        let zero = empirical_tv_kernel(&k, &pi, 1, 0, 1000, 21).unwrap();
        assert!((zero.estimate - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_tv_phi2() {
        let k = 4;
        let mut target = vec![0.5];
        target.extend(vec![0.5 / k as f64; k]);
        let mut proposal = vec![0.25];
        proposal.extend(vec![0.75 / k as f64; k]);
        let m = DiscreteModel::new(target, proposal).unwrap();
        let e = empirical_tv(&m, 0, 4, 100_000, 2).unwrap();
        assert!((e.estimate - 0.5f64.powi(5)).abs() < 3.0 * e.stderr.max(1e-3), "{e:?}");
    }

    #[test]
    fn empirical_tv_converges_with_replicas() {
        let m = DiscreteModel::new(vec![0.5, 0.3, 0.2], vec![0.2, 0.3, 0.5]).unwrap();
        let exact = exact_tv(&build_kernel(&m), m.target(), 2).unwrap();
        let truth = exact.tv(m.canonical_index(2).unwrap(), 2);
        let mut prev = f64::INFINITY;
        for reps in [2_000, 32_000, 512_000] {
            let e = empirical_tv(&m, 2, 2, reps, 4).unwrap();
            let err = (e.estimate - truth).abs();
            assert!(err < 4.0 * e.stderr + 1e-3, "reps={reps}: {err}");
            assert!(e.stderr < prev);
            prev = e.stderr;
        }
        assert!(empirical_tv(&m, 2, 2, 10, 4).is_err());
    }
}
