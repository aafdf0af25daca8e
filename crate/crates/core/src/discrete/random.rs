use rand::Rng;

use crate::measures::DiscreteModel;
use crate::rng;

/// A reproducible model on `states` states with every mass drawn from
/// `U[0.05, 1)` and normalized. Model `index` of a batch uses stream `index`.
pub fn random_model(states: usize, seed: u64, index: u64) -> DiscreteModel {
    let mut rng = rng::stream(seed, index);
    let mut draw = || -> Vec<f64> {
        let v: Vec<f64> = (0..states.max(2)).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    };
    let target = draw();
    let proposal = draw();
    DiscreteModel::normalized(target, proposal).expect("positive masses")
}

/// Like [`random_model`] with the state count drawn from `2..=max_states`.
pub fn random_model_upto(max_states: usize, seed: u64, index: u64) -> DiscreteModel {
    let states = rng::stream(seed ^ 0x5eed, index).random_range(2..=max_states.max(2));
    random_model(states, seed, index)
}
