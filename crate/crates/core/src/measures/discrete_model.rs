use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// A finite IMH instance in canonical order: states sorted by weight,
/// largest first, ties in input order.
///
/// All indices taken and returned by this type and the `discrete` module
/// are canonical; [`DiscreteModel::user_index`] maps back to the position
/// in the vectors the model was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteModel {
    target: Vec<f64>,
    proposal: Vec<f64>,
    weight: Vec<f64>,
    order: Vec<usize>,
}

impl DiscreteModel {
    /// Build from a target and proposal PMF over the same states.
    ///
    /// States where both masses vanish are dropped; states with zero target
    /// mass but positive proposal mass are kept with weight 0.
    pub fn new(target: Vec<f64>, proposal: Vec<f64>) -> Result<Self> {
        if target.len() != proposal.len() {
            return Err(Error::InvalidModel(format!(
                "target has {} states, proposal has {}",
                target.len(),
                proposal.len()
            )));
        }
        for (name, v) in [("target", &target), ("proposal", &proposal)] {
            if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "{name} mass at state {i} is {} (must be finite and nonnegative)",
                    v[i]
                )));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidModel(format!("{name} sums to {total}, not 1")));
            }
        }
        if let Some(i) = (0..target.len()).find(|&i| target[i] > 0.0 && proposal[i] == 0.0) {
            return Err(Error::InvalidModel(format!(
                "state {i} has target mass {} but zero proposal mass",
                target[i]
            )));
        }

        let mut kept: Vec<usize> = (0..target.len())
            .filter(|&i| target[i] > 0.0 || proposal[i] > 0.0)
            .collect();
        if kept.len() < 2 {
            return Err(Error::InvalidModel("need at least two states".into()));
        }
        let w = |i: usize| target[i] / proposal[i];
        // stable: equal weights keep their input order
        kept.sort_by(|&a, &b| w(b).total_cmp(&w(a)));

        Ok(Self {
            target: kept.iter().map(|&i| target[i]).collect(),
            proposal: kept.iter().map(|&i| proposal[i]).collect(),
            weight: kept.iter().map(|&i| w(i)).collect(),
            order: kept,
        })
    }

    /// Rescale both vectors to sum to one before building.
    pub fn normalized(target: Vec<f64>, proposal: Vec<f64>) -> Result<Self> {
        let scale = |v: Vec<f64>| {
            let total: f64 = v.iter().sum();
            if total > 0.0 {
                v.into_iter().map(|x| x / total).collect()
            } else {
                v
            }
        };
        Self::new(scale(target), scale(proposal))
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn proposal(&self) -> &[f64] {
        &self.proposal
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// `w⋆ = w₁`.
    pub fn wstar(&self) -> f64 {
        self.weight[0]
    }

    /// Smallest target mass over the kept states.
    pub fn min_target(&self) -> f64 {
        self.target.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_zero_weight(&self) -> bool {
        self.weight.contains(&0.0)
    }

    pub fn user_index(&self, canonical: usize) -> usize {
        self.order[canonical]
    }

    pub fn canonical_index(&self, user: usize) -> Option<usize> {
        self.order.iter().position(|&u| u == user)
    }

    /// Canonical position → input position.
    pub fn permutation(&self) -> &[usize] {
        &self.order
    }

    pub fn weight_at(&self, state: usize) -> Result<f64> {
        self.weight
            .get(state)
            .copied()
            .ok_or_else(|| Error::PointOutsideSupport(vec![state as f64]))
    }
}
