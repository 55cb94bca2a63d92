//! Consensus ADMM for sparsity-constrained semidefinite least squares.
//!
//! The problem: minimize a convex quadratic energy over symmetric matrices
//! X with a fixed sparsity pattern, subject to X being positive semidefinite
//! and annihilating a prescribed null-space vector.  The PSD constraint is
//! decomposed over the cliques of a chordal extension of the pattern, so
//! projections touch only small dense blocks; the clique contributions sum
//! to X on the pattern and cancel on the fill.
//!
//! Module layout:
//! - [`assemble`]: builds the quadratic energy and the coupling operators.
//! - [`kkt`]: dense KKT factorization with iterative refinement.
//! - [`solver`]: the ADMM loop, penalty adaptation, and reporting.

mod assemble;
mod kkt;
mod solver;

pub use assemble::{
    assemble_constraints, assemble_energy, energy_from_factors, galerkin_matrix, CoarseningProblem,
    Constraints, EnergyFactors, EnergyModel, MAX_DENSE_ENERGY,
};
pub use kkt::{factorize, KktFactorization};
pub use solver::{
    adapt_penalty, solve, write_report_json, write_timings_json, write_trace_csv, AdmmParams,
    AdmmRun, Certificate, Counters, RhoUpdate, Solution, SolveReport, StepInfo, TerminationReason,
    Timings, TraceRow, VarCounts,
};

#[derive(Debug, thiserror::Error)]
pub enum AdmmError {
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("weighted energy has no modes above the null-space threshold")]
    EmptyBasis,
    #[error("null-space vector entry {i} is {value}; must be finite and nonzero")]
    BadNullspace { i: usize, value: f64 },
    #[error("{0}")]
    Dimension(String),
    #[error("energy with {n_e} pattern unknowns exceeds the dense limit {limit}")]
    TooLarge { n_e: usize, limit: usize },
    #[error("KKT matrix is singular even after regularization")]
    Singular,
    #[error("iteration {iteration} produced a non-finite residual or objective")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Chordal(#[from] crate::chordal::ChordalError),
    #[error(transparent)]
    Sparse(#[from] crate::sparsemat::SparseError),
    #[error(transparent)]
    Eig(#[from] crate::eig::EigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
