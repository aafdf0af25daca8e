use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use nalgebra::DVector;

use crate::discrete::TransitionMatrix;
use crate::measures::DiscreteModel;

/// Closed-form eigenpairs of a discrete IMH kernel.
///
/// `eigenvalues[0] = 1` belongs to the constant vector; for `k ≥ 1`,
/// `eigenvalues[k]` belongs to `eigenvectors[k - 1]`. `normalized` holds
/// the same vectors scaled to unit `L²(π)` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
}

impl SpectralDecomposition {
    /// `λ_k` for `k ≥ 1`.
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    /// `f_k(x)` for `k ≥ 1`.
    pub fn f(&self, k: usize, x: usize) -> f64 {
        self.normalized[k - 1][x]
    }

    /// `ln ‖P^t(x,·)/π − 1‖_{2,π}` from the expansion
    /// `Σ_k f_k(x)² λ_k^{2t}`.
    pub fn log_l2_deviation(&self, x: usize, t: usize) -> f64 {
        let terms: Vec<f64> = (1..self.eigenvalues.len())
            .map(|k| {
                let f = self.f(k, x);
                let l = self.eigenvalues[k];
                if f == 0.0 || (l == 0.0 && t > 0) {
                    f64::NEG_INFINITY
                } else if t == 0 {
                    2.0 * f.abs().ln()
                } else {
                    2.0 * f.abs().ln() + 2.0 * t as f64 * l.ln()
                }
            })
            .collect();
        0.5 * crate::measures::log_sum_exp(&terms)
    }

    /// `max |(P v_k)_i − λ_k v_{k,i}|` over every eigenpair with `k ≥ 1`.
    pub fn eigen_residual(&self, kernel: &TransitionMatrix) -> f64 {
        let mut worst = 0.0f64;
        for (k, v) in self.eigenvectors.iter().enumerate() {
            let pv = kernel.as_matrix() * DVector::from_column_slice(v);
            for i in 0..v.len() {
                worst = worst.max((pv[i] - self.eigenvalues[k + 1] * v[i]).abs());
            }
        }
        worst
    }

    /// Largest `|⟨v_a, v_b⟩_π|` over distinct eigenvectors, the constant
    /// vector included.
    pub fn orthogonality(&self, pi: &[f64]) -> f64 {
        let ip = |a: &[f64], b: &[f64]| -> f64 { (0..pi.len()).map(|x| a[x] * b[x] * pi[x]).sum() };
        let ones = vec![1.0; pi.len()];
        let mut worst = 0.0f64;
        for a in 0..self.eigenvectors.len() {
            worst = worst.max(ip(&self.eigenvectors[a], &ones).abs());
            for b in 0..a {
                worst = worst.max(ip(&self.eigenvectors[a], &self.eigenvectors[b]).abs());
            }
        }
        worst
    }
}

/// Eigenvalues `λ_k = Σ_{i≥k} (p_i − π_i/w_k)` and eigenvectors
/// `v_k = (0, …, 0, S_π(k+1), −π_k, …, −π_k)` with `k − 1` leading zeros,
/// where `S_π(j) = π_j + … + π_n`.
pub fn liu_spectrum(model: &DiscreteModel) -> Result<SpectralDecomposition> {
    let n = model.len();
    let (pi, p, w) = (model.target(), model.proposal(), model.weights());
    if let Some(i) = w.iter().position(|x| *x == 0.0) {
        return Err(Error::ZeroWeightState(model.user_index(i)));
    }
    // suffix sums; the full sums are 1 by construction
    let mut s_pi = vec![0.0; n + 1];
    let mut s_p = vec![0.0; n + 1];
    for i in (0..n).rev() {
        s_pi[i] = s_pi[i + 1] + pi[i];
        s_p[i] = s_p[i + 1] + p[i];
    }
    s_pi[0] = 1.0;
    s_p[0] = 1.0;

    let mut eigenvalues = vec![1.0];
    let mut eigenvectors = Vec::with_capacity(n - 1);
    let mut normalized = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let lambda = if k == 0 {
            1.0 - 1.0 / w[0]
        } else {
            s_p[k] - s_pi[k] / w[k]
        };
        eigenvalues.push(lambda.max(0.0));
        let mut v = vec![0.0; n];
        v[k] = s_pi[k + 1];
        for entry in v.iter_mut().skip(k + 1) {
            *entry = -pi[k];
        }
        let norm2: f64 = v.iter().zip(pi).map(|(x, m)| x * x * m).sum();
        let scale = norm2.sqrt();
        normalized.push(v.iter().map(|x| x / scale).collect());
        eigenvectors.push(v);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        normalized,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues of `B = A + u_n uᵀ` given the eigenpairs of `A`, where the
/// last supplied eigenvector is `u_n`: `λ_1, …, λ_{n−1}, λ_n + uᵀu_n`.
pub fn rank_one_eigen(eigvals: &[f64], eigvecs: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
    let n = eigvals.len();
    let mut out = eigvals.to_vec();
    out[n - 1] += dot(u, &eigvecs[n - 1]);
    out
}

/// Eigenvectors of `B = A + u_n uᵀ` matching [`rank_one_eigen`]:
/// `ũ_j = u_j − c_j u_n` with `c_j = uᵀu_j / (λ_n + uᵀu_n − λ_j)`, and
/// `ũ_n = u_n`.
pub fn rank_one_eigenvectors(eigvals: &[f64], eigvecs: &[Vec<f64>], u: &[f64]) -> Result<Vec<Vec<f64>>> {
    let n = eigvals.len();
    let un = &eigvecs[n - 1];
    let shifted = eigvals[n - 1] + dot(u, un);
    let scale = eigvals.iter().fold(shifted.abs(), |m, l| m.max(l.abs())).max(1.0);
    let mut out = Vec::with_capacity(n);
    for j in 0..n - 1 {
        let num = dot(u, &eigvecs[j]);
        let den = shifted - eigvals[j];
        if num == 0.0 {
            out.push(eigvecs[j].clone());
            continue;
        }
        if den.abs() <= 1e-14 * scale {
            return Err(Error::DegeneratePerturbation {
                index: j,
                denominator: den,
            });
        }
        let c = num / den;
        out.push(eigvecs[j].iter().zip(un).map(|(a, b)| a - c * b).collect());
    }
    out.push(un.clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::build_kernel;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn pmf(raw: &[f64]) -> Vec<f64> {
        let t: f64 = raw.iter().sum();
        raw.iter().map(|x| x / t).collect()
    }

    #[test]
    fn identical_pmfs_have_zero_spectrum() {
        let p = vec![0.1, 0.2, 0.3, 0.4];
        let m = DiscreteModel::new(p.clone(), p).unwrap();
        let s = liu_spectrum(&m).unwrap();
        assert!(s.eigenvalues[1..].iter().all(|l| l.abs() < 1e-15));
    }

    #[test]
    fn matches_symmetrized_eigensolver() {
        let m = DiscreteModel::new(pmf(&[3.0, 1.0, 4.0, 1.0, 5.0]), pmf(&[2.0, 7.0, 1.0, 8.0, 2.0])).unwrap();
        let s = liu_spectrum(&m).unwrap();
        let k = build_kernel(&m);
        let pi = m.target();
        let n = pi.len();
        let sym = DMatrix::from_fn(n, n, |i, j| pi[i].sqrt() * k.get(i, j) / pi[j].sqrt());
        let mut numeric: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut closed = s.eigenvalues.clone();
        numeric.sort_by(f64::total_cmp);
        closed.sort_by(f64::total_cmp);
        for (a, b) in numeric.iter().zip(&closed) {
            assert!((a - b).abs() < 1e-12, "{numeric:?} vs {closed:?}");
        }
        assert!((s.eigenvalues[1] - (1.0 - 1.0 / m.wstar())).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_states_are_rejected() {
        let m = DiscreteModel::new(vec![0.5, 0.5, 0.0], vec![0.25, 0.25, 0.5]).unwrap();
        assert!(matches!(liu_spectrum(&m), Err(Error::ZeroWeightState(2))));
    }

    #[test]
    fn spectral_identity_against_matrix_powers() {
        let m = DiscreteModel::new(pmf(&[5.0, 3.0, 1.0, 1.0]), pmf(&[1.0, 2.0, 3.0, 4.0])).unwrap();
        let s = liu_spectrum(&m).unwrap();
        let k = build_kernel(&m);
        let pi = m.target();
        let mut pt = DMatrix::<f64>::identity(4, 4);
        for t in 0..12 {
            for x in 0..4 {
                let l2: f64 = (0..4).map(|y| (pt[(x, y)] / pi[y] - 1.0).powi(2) * pi[y]).sum();
                assert!((l2.sqrt().ln() - s.log_l2_deviation(x, t)).abs() < 1e-9 || l2 < 1e-24);
            }
            pt = &pt * k.as_matrix();
        }
    }

    #[test]
    fn rank_one_examples() {
        let vals = [3.0, 1.0];
        let vecs = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(rank_one_eigen(&vals, &vecs, &[0.0, 0.0]), vec![3.0, 1.0]);
        assert_eq!(rank_one_eigen(&vals, &vecs, &[0.0, 2.0]), vec![3.0, 3.0]);
        // B = [[3,0],[1,2]] has eigenvector (1,1) for eigenvalue 3
        let u = [1.0, 1.0];
        let vs = rank_one_eigenvectors(&vals, &vecs, &u).unwrap();
        assert_eq!(vs[0], vec![1.0, 1.0]);
        let bad = rank_one_eigenvectors(&vals, &vecs, &[1.0, 2.0]);
        assert!(matches!(bad, Err(Error::DegeneratePerturbation { index: 0, .. })));
    }

    /// Eigenvectors of an upper-triangular matrix with distinct diagonal by
    /// back substitution.
    fn triangular_eigvecs(d: &DMatrix<f64>) -> Vec<Vec<f64>> {
        let n = d.nrows();
        (0..n)
            .map(|k| {
                let mut v = vec![0.0; n];
                v[k] = 1.0;
                for i in (0..k).rev() {
                    let s: f64 = (i + 1..=k).map(|j| d[(i, j)] * v[j]).sum();
                    v[i] = s / (d[(k, k)] - d[(i, i)]);
                }
                v
            })
            .collect()
    }

    #[test]
    fn rank_one_reconstruction_of_the_kernel() {
        let m = DiscreteModel::new(pmf(&[6.0, 3.0, 2.0, 1.0]), pmf(&[1.0, 2.0, 2.0, 3.0])).unwrap();
        let k = build_kernel(&m);
        let n = m.len();
        let p = m.proposal();
        let d = DMatrix::from_fn(n, n, |i, j| k.get(i, j) - p[j]);
        for i in 0..n {
            for j in 0..i {
                assert!(d[(i, j)].abs() < 1e-15);
            }
        }
        let vals: Vec<f64> = (0..n).map(|i| d[(i, i)]).collect();
        let vecs = triangular_eigvecs(&d);
        // the last diagonal entry is 0 with the constant eigenvector
        assert!(vals[n - 1].abs() < 1e-15);
        let ones = DVector::from_element(n, 1.0);
        let last = DVector::from_column_slice(&vecs[n - 1]);
        assert!((last.clone() - ones.clone() * last[0]).amax() < 1e-12);

        let b = rank_one_eigen(&vals, &vecs, p);
        let s = liu_spectrum(&m).unwrap();
        assert!((b[n - 1] - 1.0).abs() < 1e-12);
        for k in 1..n {
            assert!((b[k - 1] - s.eigenvalues[k]).abs() < 1e-12);
        }
        let uvecs = rank_one_eigenvectors(&vals, &vecs, p).unwrap();
        for (j, v) in uvecs.iter().enumerate() {
            let pv = k.as_matrix() * DVector::from_column_slice(v);
            for i in 0..n {
                assert!((pv[i] - b[j] * v[i]).abs() < 1e-12);
            }
        }
    }

    fn model_strategy(max_n: usize) -> impl Strategy<Value = DiscreteModel> {
        (2..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..1.0, n),
                prop::collection::vec(0.01f64..1.0, n),
            )
                .prop_map(|(a, b)| DiscreteModel::new(pmf(&a), pmf(&b)).unwrap())
        })
    }

    proptest! {
        #[test]
        fn residuals_and_orthogonality(m in model_strategy(12)) {
            let s = liu_spectrum(&m).unwrap();
            prop_assert!(s.eigen_residual(&build_kernel(&m)) <= 1e-10);
            prop_assert!(s.orthogonality(m.target()) <= 1e-10);
            prop_assert_eq!(s.eigenvalues[1], 1.0 - 1.0 / m.wstar());
        }

        #[test]
        fn ties_do_not_change_the_spectrum(a in prop::collection::vec(0.05f64..1.0, 4), q in 0.05f64..1.0) {
            // states 0 and 1 share a weight; swapping their input order
            // permutes the canonical order but not the spectrum
            let mut t = vec![2.0 * q, q, a[0], a[1]];
            let mut p = vec![2.0 * a[2], a[2], a[3], 1.0];
            let m1 = DiscreteModel::normalized(t.clone(), p.clone()).unwrap();
            t.swap(0, 1);
            p.swap(0, 1);
            let m2 = DiscreteModel::normalized(t, p).unwrap();
            let (s1, s2) = (liu_spectrum(&m1).unwrap(), liu_spectrum(&m2).unwrap());
            for (x, y) in s1.eigenvalues.iter().zip(&s2.eigenvalues) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
