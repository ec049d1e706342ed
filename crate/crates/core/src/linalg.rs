//! Dense symmetric helpers over `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{FsdError, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigen-decomposition `A = V diag(λ) Vᵀ` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricEigen {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        let report = condition_report(&matrix);
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(FsdError::EigenFailure { dim, report });
        }
        match matrix.try_symmetric_eigen(EIGEN_EPS, EIGEN_MAX_ITER) {
            Some(e) => Ok(Self {
                eigenvalues: e.eigenvalues,
                eigenvectors: e.eigenvectors,
            }),
            None => Err(FsdError::EigenFailure { dim, report }),
        }
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &l) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= f(l);
        }
        scaled * self.eigenvectors.transpose()
    }

    /// `V diag(f(λ)) Vᵀ v` without forming the matrix.
    pub fn apply_to(&self, f: impl Fn(f64) -> f64, v: &DVector<f64>) -> DVector<f64> {
        let mut coords = self.eigenvectors.tr_mul(v);
        for (c, &l) in coords.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(l);
        }
        &self.eigenvectors * coords
    }

    pub fn max_abs(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn condition_report(m: &DMatrix<f64>) -> String {
    let nonfinite = m.iter().filter(|v| !v.is_finite()).count();
    let max_abs = m.iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()));
    let asym = if m.is_square() {
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..i {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    } else {
        f64::NAN
    };
    format!("max |entry| = {max_abs:e}, non-finite entries = {nonfinite}, max asymmetry = {asym:e}")
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn symmetric_op_norm(m: DMatrix<f64>) -> Result<f64> {
    if is_diagonal(&m) {
        return Ok(m.diagonal().iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    Ok(SymmetricEigen::new(m)?.max_abs())
}

pub fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| i == j || m[(i, j)] == 0.0))
}

/// `D A D` for diagonal `D = diag(d)`.
pub fn scale_symmetric(a: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| d[i] * a[(i, j)] * d[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_reconstructs_and_inverts() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let e = SymmetricEigen::new(a.clone()).unwrap();
        let back = e.apply(|x| x);
        assert!((back - &a).abs().max() < 1e-12);
        let inv = e.apply(|x| 1.0 / x);
        let id = &inv * &a;
        assert!((id - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert!((e.apply_to(|x| x, &v) - &a * &v).abs().max() < 1e-12);
    }

    #[test]
    fn op_norm_diagonal_fast_path() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -2.0, 1.0]));
        assert_eq!(symmetric_op_norm(m).unwrap(), 2.0);
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((symmetric_op_norm(m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_input_reports_condition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        let err = SymmetricEigen::new(m).unwrap_err().to_string();
        assert!(err.contains("non-finite entries = 2"), "{err}");
    }
}
