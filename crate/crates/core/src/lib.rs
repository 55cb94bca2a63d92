//! Spectral coarsening of sparse PSD geometric operators.
//!
//! Given a fine operator (typically a cotangent Laplacian) and a lumped mass
//! matrix, this crate builds a much smaller operator on a subset of the
//! vertices that reproduces the action of the fine operator on its low
//! eigenfunctions, while staying sparse and positive semidefinite.  The PSD
//! constraint is enforced through a chordal decomposition of the sparsity
//! pattern: the big cone constraint splits into many small clique-sized ones,
//! which an ADMM loop projects in parallel.
//!
//! Module map:
//! * [`sparsemat`] - symmetric sparsity patterns, lower-triangle indexing,
//!   Matrix Market I/O.
//! * [`chordal`] - elimination orderings, chordal extension, maximal cliques,
//!   clique merging.
//! * [`meshops`] - triangle mesh loading, cotangent Laplacian, lumped mass,
//!   farthest-point sampling and clustering.
//! * [`eig`] - dense symmetric eigensolvers and PSD projection.
//! * [`admm`] - energy/constraint assembly, the KKT system, and the solver.
//! * [`metrics`] - functional map quality measures and biharmonic distances.
//! * [`meshgen`] - deterministic procedural meshes used by tests and demos.

pub mod admm;
pub mod chordal;
pub mod eig;
pub mod meshgen;
pub mod meshops;
pub mod metrics;
pub mod numfmt;
pub mod sparsemat;

pub use nalgebra::{DMatrix, DVector};
