//! Dense KKT system for the quadratic step of the splitting method.
//!
//! The saddle system couples the energy Hessian H with two constraint
//! blocks: the chordal-consensus rows C (one per extension entry, with a
//! damped diagonal -D D'/rho) and the null-space rows G.  With H positive
//! semidefinite and D D' positive definite the leading 2x2 block is quasi-
//! definite, so an LU factorization succeeds; a tiny diagonal shift is
//! retried once if conditioning defeats it anyway.
//!
//! Block variables use scaled coordinates: off-diagonal entries carry a
//! factor of sqrt(2) so the vector two-norm equals the Frobenius norm of
//! the expanded matrices.  Off-diagonal consensus rows therefore couple to
//! the pattern unknowns with coefficient sqrt(2) rather than one.

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use super::assemble::CoarseningProblem;
use super::AdmmError;

/// Diagonal shift factor for the regularized retry.
const REGULARIZATION: f64 = 1e-10;

pub struct KktFactorization {
    matrix: DMatrix<f64>,
    lu: LU<f64, Dyn, Dyn>,
    pub rho: f64,
    pub regularized: bool,
}

fn build_matrix(problem: &CoarseningProblem, rho: f64, delta: f64) -> DMatrix<f64> {
    let n_x = problem.n_x();
    let n_c = problem.n_chordal();
    let n_m = problem.n_nullspace();
    let dim = n_x + n_c + n_m;
    let mut k = DMatrix::zeros(dim, dim);
    k.view_mut((0, 0), (n_x, n_x))
        .copy_from(&problem.energy.quadratic);
    let entries = problem.map_c.pattern().entries();
    for r in 0..n_c {
        if let Some(a) = problem.cons.x_col[r] {
            let (i, j) = entries[r];
            let w = if i == j { 1.0 } else { SQRT_2 };
            k[(n_x + r, a)] = w;
            k[(a, n_x + r)] = w;
        }
        k[(n_x + r, n_x + r)] = -problem.cons.multiplicity[r] / rho - delta;
    }
    for (i, row) in problem.cons.nullspace_rows.iter().enumerate() {
        for &(a, coef) in row {
            k[(n_x + n_c + i, a)] = coef;
            k[(a, n_x + n_c + i)] = coef;
        }
        k[(n_x + n_c + i, n_x + n_c + i)] = -delta;
    }
    k
}

/// Mean magnitude of the diagonal, floored at one; scales the shift.
fn trace_scale(k: &DMatrix<f64>) -> f64 {
    let dim = k.nrows();
    if dim == 0 {
        return 1.0;
    }
    let mean = (0..dim).map(|i| k[(i, i)].abs()).sum::<f64>() / dim as f64;
    mean.max(1.0)
}

pub fn factorize(problem: &CoarseningProblem, rho: f64) -> Result<KktFactorization, AdmmError> {
    let matrix = build_matrix(problem, rho, 0.0);
    let lu = matrix.clone().lu();
    if lu.is_invertible() {
        return Ok(KktFactorization {
            matrix,
            lu,
            rho,
            regularized: false,
        });
    }
    let delta = REGULARIZATION * trace_scale(&matrix);
    let matrix = build_matrix(problem, rho, delta);
    let lu = matrix.clone().lu();
    if lu.is_invertible() {
        Ok(KktFactorization {
            matrix,
            lu,
            rho,
            regularized: true,
        })
    } else {
        Err(AdmmError::Singular)
    }
}

impl KktFactorization {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The assembled saddle matrix (read-only; useful for diagnostics).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Solves against the stored factorization with one step of iterative
    /// refinement; returns the solution and its final residual norm.
    pub fn solve_refined(&self, rhs: &DVector<f64>) -> Result<(DVector<f64>, f64), AdmmError> {
        let mut sol = self.lu.solve(rhs).ok_or(AdmmError::Singular)?;
        let residual = rhs - &self.matrix * &sol;
        if let Some(correction) = self.lu.solve(&residual) {
            sol += correction;
        }
        let final_residual = (rhs - &self.matrix * &sol).norm();
        Ok((sol, final_residual))
    }
}
