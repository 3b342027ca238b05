use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

pub fn solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    a.lu()
        .solve(&rhs)
        .map(|x| x.as_slice().to_vec())
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn solve_matrix(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("singular linear system".into()))
}

pub fn inverse(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.try_inverse()
        .ok_or_else(|| Error::Numerical("singular matrix".into()))
}

/// `(I - γ P) x = b` for row-stochastic `P`.
pub fn solve_discounted(p: &DMatrix<f64>, gamma: f64, b: &[f64]) -> Result<Vec<f64>> {
    let n = p.nrows();
    let a = DMatrix::identity(n, n) - p * gamma;
    solve(a, b)
}
