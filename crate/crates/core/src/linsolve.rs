//! Sparse direct solves with iterative refinement.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};
use crate::sparse::{norm_inf, SparseMatrix};

/// Default normwise backward-error tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;

const MAX_REFINEMENT: usize = 4;

/// A sparse LU factorization kept alongside its matrix for residual checks.
pub struct Factorization {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
    norm: f64,
    tol: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .field("tol", &self.tol)
            .finish()
    }
}

impl Factorization {
    pub fn new(matrix: SparseMatrix, tol: f64) -> Result<Self> {
        assert_eq!(matrix.nrows(), matrix.ncols(), "system must be square");
        let n = matrix.nrows();
        let triplets: Vec<Triplet<usize, usize, f64>> = matrix.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|_| Error::LinearSolve { residual: f64::INFINITY })?;
        let lu = csc.sp_lu().map_err(|_| Error::LinearSolve { residual: f64::INFINITY })?;
        let norm = matrix.norm_inf();
        Ok(Factorization { matrix, lu, norm, tol })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = faer::col::Col::<f64>::from_fn(b.len(), |i| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[i]).collect()
    }

    /// `‖b − Ax‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub fn backward_error(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let scale = self.norm * norm_inf(x) + norm_inf(b);
        if scale == 0.0 {
            0.0
        } else {
            norm_inf(&r) / scale
        }
    }

    /// Solves `Ax = b`, refining until the backward error meets the tolerance.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.matrix.nrows());
        let mut x = self.raw_solve(b);
        let mut err = self.backward_error(&x, b);
        for _ in 0..MAX_REFINEMENT {
            if !err.is_finite() || err <= self.tol {
                break;
            }
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let dx = self.raw_solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let cand_err = self.backward_error(&cand, b);
            if cand_err >= err {
                break;
            }
            x = cand;
            err = cand_err;
        }
        if err.is_finite() && err <= self.tol {
            Ok(x)
        } else {
            Err(Error::LinearSolve { residual: err })
        }
    }
}

/// One-shot solve of a sparse square system.
pub fn solve_sparse(matrix: SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    Factorization::new(matrix, tol)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Triplets;

    #[test]
    fn identity_and_swap() {
        let x = solve_sparse(SparseMatrix::identity(3), &[1.0, -2.0, 3.0], DEFAULT_TOL).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
        let mut t = Triplets::new(2, 2);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let x = solve_sparse(t.to_csr(), &[1.0, 2.0], DEFAULT_TOL).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structurally_singular_system_fails() {
        let mut t = Triplets::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        assert!(solve_sparse(t.to_csr(), &[1.0, 0.0], DEFAULT_TOL).is_err());
    }
}
