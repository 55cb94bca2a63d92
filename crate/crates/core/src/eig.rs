//! Dense symmetric eigensolvers with deterministic ordering and signs, the
//! generalized eigenbasis of an operator pair (L, M), and projection onto
//! the positive semidefinite cone.
//!
//! All routines sort eigenvalues ascending and flip each eigenvector so its
//! largest-magnitude entry is positive (first such entry on ties), which
//! pins down the otherwise arbitrary sign and keeps downstream artifacts
//! reproducible.

use nalgebra::{DMatrix, DVector};

use crate::sparsemat::SymSparse;

/// Eigenvalues at or below this fraction of the largest one count as null
/// modes and are dropped wherever a spectrum is inverted.
pub const NULL_EIGENVALUE_FACTOR: f64 = 1e-8;

#[derive(Debug, thiserror::Error)]
pub enum EigError {
    #[error("mass entry {i} is {value}; must be positive and finite")]
    BadMass { i: usize, value: f64 },
    #[error("requested {k} eigenpairs from an operator of size {n}")]
    BadCount { k: usize, n: usize },
    #[error("mass vector has length {got}, operator has {want} rows")]
    DimensionMismatch { got: usize, want: usize },
}

/// Eigenvalues (ascending) and M-orthonormal eigenvectors of a pair (L, M).
#[derive(Clone, Debug)]
pub struct EigenBasis {
    values: Vec<f64>,
    /// One column per eigenpair.
    vectors: DMatrix<f64>,
}

impl EigenBasis {
    pub fn new(values: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        assert_eq!(values.len(), vectors.ncols());
        EigenBasis { values, vectors }
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn max_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Eigendecomposition of a symmetric dense matrix: eigenvalues ascending,
/// orthonormal eigenvector columns with the deterministic sign fix.  The
/// input is symmetrized first, so tiny asymmetries from accumulation do not
/// leak into the decomposition.
pub fn sym_eig_dense(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (a + a.transpose()) * 0.5;
    let decomp = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        decomp.eigenvalues[p]
            .partial_cmp(&decomp.eigenvalues[q])
            .expect("finite eigenvalues")
            .then(p.cmp(&q))
    });
    let values: Vec<f64> = order.iter().map(|&p| decomp.eigenvalues[p]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    (values, vectors)
}

/// Flips each column so its largest-magnitude entry is positive; the first
/// such entry decides on ties.
fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut lead = 0;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            col *= -1.0;
        }
    }
}

/// The `k` smallest generalized eigenpairs of (L, M) with M diagonal
/// positive: L phi = lambda M phi, vectors M-orthonormal.  Solved through
/// the similarity transform M^{-1/2} L M^{-1/2}.
pub fn smallest_eigenpairs(l: &SymSparse, mass: &[f64], k: usize) -> Result<EigenBasis, EigError> {
    let n = l.n();
    if mass.len() != n {
        return Err(EigError::DimensionMismatch {
            got: mass.len(),
            want: n,
        });
    }
    if k < 1 || k > n {
        return Err(EigError::BadCount { k, n });
    }
    for (i, &m) in mass.iter().enumerate() {
        if !(m > 0.0) || !m.is_finite() {
            return Err(EigError::BadMass { i, value: m });
        }
    }
    let inv_sqrt: Vec<f64> = mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    let mut similar = l.to_dense();
    for i in 0..n {
        for j in 0..n {
            similar[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let (values, psi) = sym_eig_dense(&similar);
    let mut vectors = DMatrix::zeros(n, k);
    for c in 0..k {
        for r in 0..n {
            vectors[(r, c)] = inv_sqrt[r] * psi[(r, c)];
        }
    }
    fix_signs(&mut vectors);
    Ok(EigenBasis::new(values[..k].to_vec(), vectors))
}

/// Nearest positive semidefinite matrix in Frobenius norm: symmetrize,
/// eigendecompose, clamp negative eigenvalues to zero, reassemble.
pub fn psd_project(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, q) = sym_eig_dense(a);
    let clamped = DVector::from_iterator(values.len(), values.iter().map(|&v| v.max(0.0)));
    let scaled = &q * DMatrix::from_diagonal(&clamped);
    let b = scaled * q.transpose();
    (&b + b.transpose()) * 0.5
}

/// Smallest and largest eigenvalue of a symmetric dense matrix.
pub fn extreme_eigenvalues(a: &DMatrix<f64>) -> (f64, f64) {
    let (values, _) = sym_eig_dense(a);
    match (values.first(), values.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    }
}
