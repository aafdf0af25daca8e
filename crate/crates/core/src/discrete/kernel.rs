use crate::error::{Error, Result};
use crate::measures::DiscreteModel;
use nalgebra::DMatrix;

const ROW_TOL: f64 = 1e-12;

/// A row-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    entries: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Wrap a square matrix given by rows, checking nonnegativity and row
    /// sums.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidModel(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self::from_matrix(entries)
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidModel(
                "transition matrix must be square and nonempty".into(),
            ));
        }
        for (i, row) in entries.row_iter().enumerate() {
            if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidModel(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let s = row.sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidModel(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.entries.row(i).iter().copied().collect()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `max_j |(πP)_j − π_j|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let n = self.n();
        (0..n)
            .map(|j| ((0..n).map(|i| pi[i] * self.entries[(i, j)]).sum::<f64>() - pi[j]).abs())
            .fold(0.0, f64::max)
    }

    /// `max_{i,j} |π_i P(i,j) − π_j P(j,i)|`.
    pub fn reversibility_defect(&self, pi: &[f64]) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((pi[i] * self.entries[(i, j)] - pi[j] * self.entries[(j, i)]).abs());
            }
        }
        worst
    }
}

/// IMH kernel of a discrete model: a move `i → j` is proposed with
/// probability `p_j` and accepted with probability `min(1, w_j/w_i)`.
/// From a zero-weight state every proposal is accepted.
pub fn build_kernel(model: &DiscreteModel) -> TransitionMatrix {
    let n = model.len();
    let (p, w) = (model.proposal(), model.weights());
    let accept = |i: usize, j: usize| {
        if w[i] == 0.0 {
            1.0
        } else {
            (w[j] / w[i]).min(1.0)
        }
    };
    let mut entries = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut stay = p[i];
        for j in (0..n).filter(|&j| j != i) {
            let a = accept(i, j);
            entries[(i, j)] = p[j] * a;
            stay += p[j] * (1.0 - a);
        }
        entries[(i, i)] = stay;
    }
    TransitionMatrix { entries }
}
