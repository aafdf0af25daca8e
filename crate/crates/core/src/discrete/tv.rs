use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discrete::TransitionMatrix;
use crate::error::{Error, Result};

const STATIONARY_TOL: f64 = 1e-10;

/// Exact `‖P^t(x,·) − π‖_TV` for every start state and `t = 0..=horizon`.
///
/// Logs are kept alongside the values so that decay rates can be fitted
/// long after the distances themselves underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvTrajectory {
    /// `per_state[x][t]`
    pub per_state: Vec<Vec<f64>>,
    pub log_per_state: Vec<Vec<f64>>,
    pub d_max: Vec<f64>,
    pub log_d_max: Vec<f64>,
    pub horizon: usize,
}

impl TvTrajectory {
    pub fn tv(&self, x: usize, t: usize) -> f64 {
        self.per_state[x][t]
    }
}

/// Propagate the signed deviation `μ_t = P^t(x,·) − π` through
/// `P − 1πᵀ`, rescaling each step so the magnitude is carried in a
/// separate log factor.
pub fn exact_tv(p: &TransitionMatrix, pi: &[f64], horizon: usize) -> Result<TvTrajectory> {
    let n = p.n();
    if pi.len() != n {
        return Err(Error::InvalidModel(format!(
            "stationary vector has {} entries, matrix has {n}",
            pi.len()
        )));
    }
    let resid = p.stationarity_residual(pi);
    if resid > STATIONARY_TOL {
        return Err(Error::NotStationary(resid));
    }
    let m = p.as_matrix();
    let deviation: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)] - pi[j]).collect()).collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut mu: Vec<f64> = (0..n).map(|j| if j == x { 1.0 - pi[j] } else { -pi[j] }).collect();
            let mut log_scale = 0.0f64;
            let mut tv = Vec::with_capacity(horizon + 1);
            let mut log_tv = Vec::with_capacity(horizon + 1);
            let mut next = vec![0.0; n];
            for t in 0..=horizon {
                let l1: f64 = mu.iter().map(|v| v.abs()).sum();
                let lt = if l1 == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    log_scale + (0.5 * l1).ln()
                };
                log_tv.push(lt);
                tv.push(lt.exp().min(1.0));
                if t == horizon {
                    break;
                }
                if l1 == 0.0 {
                    continue;
                }
                next.iter_mut().for_each(|v| *v = 0.0);
                for (i, mi) in mu.iter().enumerate() {
                    if *mi != 0.0 {
                        for (nj, dij) in next.iter_mut().zip(&deviation[i]) {
                            *nj += mi * dij;
                        }
                    }
                }
                let peak = next.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if peak == 0.0 {
                    mu.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    for (dst, src) in mu.iter_mut().zip(&next) {
                        *dst = src / peak;
                    }
                    log_scale += peak.ln();
                }
            }
            (tv, log_tv)
        })
        .collect();

    let (per_state, log_per_state): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let log_d_max: Vec<f64> = (0..=horizon)
        .map(|t| log_per_state.iter().map(|r| r[t]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let d_max = log_d_max.iter().map(|l| l.exp().min(1.0)).collect();
    Ok(TvTrajectory {
        per_state,
        log_per_state,
        d_max,
        log_d_max,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::build_kernel;
    use crate::measures::DiscreteModel;
    use nalgebra::DMatrix;

    fn three_point() -> TransitionMatrix {
        let t = 1.0 / 3.0;
        TransitionMatrix::from_rows(&[vec![t, t, t], vec![t, 2.0 * t, 0.0], vec![t, 0.0, 2.0 * t]]).unwrap()
    }

    #[test]
    fn three_point_chain() {
        let tv = exact_tv(&three_point(), &[1.0 / 3.0; 3], 10).unwrap();
        for t in 1..=10 {
            assert!(tv.tv(0, t) < 1e-15);
            let want = 0.5 * (2.0f64 / 3.0).powi(t as i32);
            assert!((tv.tv(1, t) - want).abs() < 1e-14);
        }
        assert!((tv.tv(1, 0) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sharpness_phi1() {
        let m = DiscreteModel::new(vec![0.5, 0.5, 0.0, 0.0], vec![0.25; 4]).unwrap();
        let tv = exact_tv(&build_kernel(&m), m.target(), 30).unwrap();
        for t in 0..=30 {
            let half = 0.5f64.powi(t as i32);
            assert!((tv.d_max[t] - half).abs() <= 1e-12 * half.max(1e-300) + 1e-300);
            assert!((tv.tv(0, t) - 0.5 * half).abs() <= 1e-12 * half);
        }
    }

    #[test]
    fn matches_matrix_powers_and_keeps_relative_precision() {
        let m = DiscreteModel::normalized(vec![4.0, 1.0, 2.0, 3.0], vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let k = build_kernel(&m);
        let tv = exact_tv(&k, m.target(), 400).unwrap();
        let mut pt = DMatrix::<f64>::identity(4, 4);
        for t in 0..=12 {
            for x in 0..4 {
                let want: f64 = 0.5 * (0..4).map(|y| (pt[(x, y)] - m.target()[y]).abs()).sum::<f64>();
                assert!((tv.tv(x, t) - want).abs() < 1e-13);
            }
            pt = &pt * k.as_matrix();
        }
        // deep in the tail the log-distance keeps decreasing at the exact rate
        let r = (1.0 - 1.0 / m.wstar()).ln();
        let slope = tv.log_per_state[2][400] - tv.log_per_state[2][399];
        assert!((slope - r).abs() < 1e-9);
        assert!(tv.log_per_state[2][400] < -200.0);
    }

    #[test]
    fn rejects_non_stationary_vector() {
        assert!(matches!(
            exact_tv(&three_point(), &[0.5, 0.25, 0.25], 3),
            Err(Error::NotStationary(_))
        ));
    }
}
