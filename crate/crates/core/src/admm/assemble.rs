//! Builds the quadratic energy and coupling operators of a coarsening solve.
//!
//! The energy is 0.5 * ||W - V X U||_F^2 for fixed factors (W, V, U) with V
//! diagonal.  Over the compressed pattern unknowns x it becomes
//! 0.5 x' H x - g' x + f0, where H is assembled entry by entry from the
//! small Gram matrices S = U U' and T = V' V; the Kronecker product they
//! implicitly form is never materialized.

use nalgebra::{DMatrix, DVector};

use crate::chordal::{chordal_extension, maximal_cliques, merge_cliques, CliqueSet};
use crate::eig::{psd_project, EigenBasis, NULL_EIGENVALUE_FACTOR};
use crate::meshops::CoarseningSetup;
use crate::sparsemat::{SymSparse, TrilIndexMap};

use super::AdmmError;

/// Hard cap on pattern unknowns for the dense energy Hessian.
pub const MAX_DENSE_ENERGY: usize = 20_000;

/// The factors of the energy 0.5 * ||W - V X U||_F^2, V = diag(v_diag).
#[derive(Clone, Debug)]
pub struct EnergyFactors {
    /// Right factor, one row per coarse vertex, one column per mode.
    pub u: DMatrix<f64>,
    /// Diagonal left factor (inverse square roots of the coarse mass).
    pub v_diag: Vec<f64>,
    /// Target matrix, same shape as `u`.
    pub w: DMatrix<f64>,
}

impl EnergyFactors {
    /// Evaluates the energy directly on a dense candidate, bypassing the
    /// assembled quadratic form.  Used to score dense baselines that do not
    /// live on the pattern.
    pub fn dense_objective(&self, x: &DMatrix<f64>) -> f64 {
        let mut vxu = x * &self.u;
        for (r, &v) in self.v_diag.iter().enumerate() {
            for c in 0..vxu.ncols() {
                vxu[(r, c)] *= v;
            }
        }
        let diff = &self.w - vxu;
        0.5 * diff.iter().map(|&d| d * d).sum::<f64>()
    }
}

/// Energy in compressed coordinates: 0.5 x' H x - g' x + constant.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    pub quadratic: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub factors: EnergyFactors,
    /// Number of spectral modes kept after null-mode dropping.
    pub modes: usize,
}

impl EnergyModel {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * (&self.quadratic * &xv).dot(&xv) - self.linear.dot(&xv) + self.constant
    }
}

/// Index pairs (row, col) a compressed entry expands to: one for a diagonal
/// entry, the position and its mirror for an off-diagonal one.
fn entry_pairs(i: usize, j: usize) -> Vec<(usize, usize)> {
    if i == j {
        vec![(i, i)]
    } else {
        vec![(i, j), (j, i)]
    }
}

/// Assembles (H, g, f0) from the energy factors over a pattern map.
///
/// H_ab sums T_{i1,i2} S_{j1,j2} over the expansion pairs of entries a and
/// b; T diagonal means only matching rows survive.  g gathers the entries
/// of V W U' over each expansion, and f0 = 0.5 ||W||_F^2.
pub fn energy_from_factors(
    factors: &EnergyFactors,
    map: &TrilIndexMap,
) -> Result<(DMatrix<f64>, DVector<f64>, f64), AdmmError> {
    let m = factors.u.nrows();
    if factors.v_diag.len() != m || factors.w.nrows() != m || map.pattern().n() != m {
        return Err(AdmmError::Dimension(format!(
            "energy factors disagree on the coarse dimension: u has {m} rows, \
             v has {}, w has {}, pattern has {}",
            factors.v_diag.len(),
            factors.w.nrows(),
            map.pattern().n()
        )));
    }
    if factors.w.ncols() != factors.u.ncols() {
        return Err(AdmmError::Dimension(format!(
            "w has {} columns, u has {}",
            factors.w.ncols(),
            factors.u.ncols()
        )));
    }
    let n_e = map.len();
    if n_e > MAX_DENSE_ENERGY {
        return Err(AdmmError::TooLarge {
            n_e,
            limit: MAX_DENSE_ENERGY,
        });
    }
    let s = &factors.u * factors.u.transpose();
    let t: Vec<f64> = factors.v_diag.iter().map(|&v| v * v).collect();
    let mut vw = factors.w.clone();
    for (r, &v) in factors.v_diag.iter().enumerate() {
        for c in 0..vw.ncols() {
            vw[(r, c)] *= v;
        }
    }
    let a_lin = vw * factors.u.transpose();

    let pairs: Vec<Vec<(usize, usize)>> = map
        .pattern()
        .entries()
        .iter()
        .map(|&(i, j)| entry_pairs(i, j))
        .collect();
    let mut h = DMatrix::zeros(n_e, n_e);
    for a in 0..n_e {
        for b in a..n_e {
            let mut acc = 0.0;
            for &(i1, j1) in &pairs[a] {
                for &(i2, j2) in &pairs[b] {
                    if i1 == i2 {
                        acc += t[i1] * s[(j1, j2)];
                    }
                }
            }
            h[(a, b)] = acc;
            h[(b, a)] = acc;
        }
    }
    let mut g = DVector::zeros(n_e);
    for (a, p) in pairs.iter().enumerate() {
        g[a] = p.iter().map(|&(i, j)| a_lin[(i, j)]).sum();
    }
    let f0 = 0.5 * factors.w.iter().map(|&w| w * w).sum::<f64>();
    Ok((h, g, f0))
}

/// Builds the energy factors for coarsening an operator pair (L, M) against
/// a spectral basis.  Weighted mode scales each basis column by its inverse
/// eigenvalue and drops near-null modes; unweighted keeps all columns as is.
pub fn assemble_energy(
    l: &SymSparse,
    fine_mass: &[f64],
    setup: &CoarseningSetup,
    basis: &EigenBasis,
    weighted: bool,
) -> Result<EnergyFactors, AdmmError> {
    let n = l.n();
    if fine_mass.len() != n || basis.n() != n || setup.assignment.len() != n {
        return Err(AdmmError::Dimension(format!(
            "fine dimensions disagree: operator {n}, mass {}, basis {}, assignment {}",
            fine_mass.len(),
            basis.n(),
            setup.assignment.len()
        )));
    }
    let threshold = NULL_EIGENVALUE_FACTOR * basis.max_value();
    let kept: Vec<usize> = if weighted {
        (0..basis.k())
            .filter(|&c| basis.values()[c] > threshold)
            .collect()
    } else {
        (0..basis.k()).collect()
    };
    if kept.is_empty() {
        return Err(AdmmError::EmptyBasis);
    }
    // Basis columns, inverse-eigenvalue scaled in weighted mode.
    let mut phi = DMatrix::zeros(n, kept.len());
    for (dst, &src) in kept.iter().enumerate() {
        let scale = if weighted {
            1.0 / basis.values()[src]
        } else {
            1.0
        };
        for r in 0..n {
            phi[(r, dst)] = scale * basis.vectors()[(r, src)];
        }
    }
    let restriction = setup.restriction();
    let u = restriction.select_rows(&phi);
    // W = Mc^{1/2} R M^{-1} L Phi, column by column through the sparse L.
    let mut l_phi = DMatrix::zeros(n, kept.len());
    let mut col = vec![0.0; n];
    for c in 0..kept.len() {
        for r in 0..n {
            col[r] = phi[(r, c)];
        }
        let out = l.apply(&col);
        for r in 0..n {
            l_phi[(r, c)] = out[r] / fine_mass[r];
        }
    }
    let mut w = restriction.select_rows(&l_phi);
    for (r, &mass) in setup.coarse_mass.iter().enumerate() {
        let root = mass.sqrt();
        for c in 0..w.ncols() {
            w[(r, c)] *= root;
        }
    }
    let v_diag: Vec<f64> = setup.coarse_mass.iter().map(|&m| 1.0 / m.sqrt()).collect();
    Ok(EnergyFactors { u, v_diag, w })
}

/// Coupling operators between the pattern unknowns, the chordal-extension
/// entries, and the per-clique blocks.  All three are index maps with unit
/// coefficients except the null-space rows, which carry the vector entries.
#[derive(Clone, Debug)]
pub struct Constraints {
    /// Per chordal entry: its pattern index, or None on fill (pinned to 0).
    pub x_col: Vec<Option<usize>>,
    /// Per chordal entry: the block columns that sum into it.
    pub block_cols: Vec<Vec<usize>>,
    /// Per chordal entry: how many blocks cover it (the diagonal of D D').
    pub multiplicity: Vec<f64>,
    /// Per block column: the chordal entry it belongs to.
    pub col_row: Vec<usize>,
    /// Start of each clique's slice in the concatenated block vector.
    pub offsets: Vec<usize>,
    /// Total length of the concatenated block vector.
    pub z_len: usize,
    /// Null-space rows over the pattern unknowns: (column, coefficient).
    pub nullspace_rows: Vec<Vec<(usize, f64)>>,
    /// Null-space vector and required right-hand side.
    pub nullspace: Vec<f64>,
    pub rhs: Vec<f64>,
}

pub fn assemble_constraints(
    nullspace: &[f64],
    rhs: &[f64],
    map_e: &TrilIndexMap,
    map_c: &TrilIndexMap,
    cliques: &CliqueSet,
) -> Result<Constraints, AdmmError> {
    let m = map_e.pattern().n();
    if nullspace.len() != m || rhs.len() != m || map_c.pattern().n() != m {
        return Err(AdmmError::Dimension(format!(
            "constraint dimensions disagree: pattern {m}, nullspace {}, rhs {}, extension {}",
            nullspace.len(),
            rhs.len(),
            map_c.pattern().n()
        )));
    }
    if !map_e.pattern().is_subset_of(map_c.pattern()) {
        return Err(AdmmError::Dimension(
            "chordal extension does not contain the pattern".into(),
        ));
    }
    for (i, &v) in nullspace.iter().enumerate() {
        if !v.is_finite() || v == 0.0 {
            return Err(AdmmError::BadNullspace { i, value: v });
        }
    }
    let mut offsets = Vec::with_capacity(cliques.cliques().len());
    let mut z_len = 0;
    for clique in cliques.cliques() {
        offsets.push(z_len);
        z_len += clique.tril_len();
    }
    let n_c = map_c.len();
    let mut x_col = Vec::with_capacity(n_c);
    let mut block_cols = vec![Vec::new(); n_c];
    let mut col_row = vec![usize::MAX; z_len];
    for (r, &(i, j)) in map_c.pattern().entries().iter().enumerate() {
        x_col.push(map_e.forward(i, j));
        for (k, clique) in cliques.cliques().iter().enumerate() {
            if let (Some(li), Some(lj)) = (clique.local_index(i), clique.local_index(j)) {
                let local = clique
                    .tril()
                    .forward(li.max(lj), li.min(lj))
                    .expect("full local pattern");
                let col = offsets[k] + local;
                block_cols[r].push(col);
                col_row[col] = r;
            }
        }
        if block_cols[r].is_empty() {
            return Err(AdmmError::Dimension(format!(
                "chordal entry ({i}, {j}) is covered by no clique"
            )));
        }
    }
    debug_assert!(col_row.iter().all(|&r| r != usize::MAX));
    let multiplicity = block_cols.iter().map(|c| c.len() as f64).collect();
    let mut nullspace_rows = vec![Vec::new(); m];
    for (a, &(i, j)) in map_e.pattern().entries().iter().enumerate() {
        if i == j {
            nullspace_rows[i].push((a, nullspace[i]));
        } else {
            nullspace_rows[i].push((a, nullspace[j]));
            nullspace_rows[j].push((a, nullspace[i]));
        }
    }
    Ok(Constraints {
        x_col,
        block_cols,
        multiplicity,
        col_row,
        offsets,
        z_len,
        nullspace_rows,
        nullspace: nullspace.to_vec(),
        rhs: rhs.to_vec(),
    })
}

/// Dense Galerkin projection R L R' of a sparse operator onto the samples.
pub fn galerkin_matrix(l: &SymSparse, samples: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(samples.len(), samples.len(), |r, c| {
        l.get(samples[r], samples[c])
    })
}

/// A fully assembled coarsening solve: energy, chordal decomposition,
/// coupling maps, and the warm-start point.
#[derive(Clone, Debug)]
pub struct CoarseningProblem {
    pub map_e: TrilIndexMap,
    pub map_c: TrilIndexMap,
    pub cliques: CliqueSet,
    pub energy: EnergyModel,
    pub cons: Constraints,
    /// Compressed Galerkin projection, the warm-start point.
    pub initial_x: Vec<f64>,
}

impl CoarseningProblem {
    /// Assembles the full problem for an operator pair, a coarsening setup,
    /// and a spectral basis.  `clique_threshold` bounds the merged block
    /// size.
    pub fn assemble(
        l: &SymSparse,
        fine_mass: &[f64],
        setup: &CoarseningSetup,
        basis: &EigenBasis,
        weighted: bool,
        clique_threshold: usize,
    ) -> Result<Self, AdmmError> {
        if setup.pattern.n() != setup.m() {
            return Err(AdmmError::Dimension(format!(
                "coarse pattern is {}x{} but there are {} samples",
                setup.pattern.n(),
                setup.pattern.n(),
                setup.m()
            )));
        }
        let factors = assemble_energy(l, fine_mass, setup, basis, weighted)?;
        let modes = factors.u.ncols();
        let map_e = TrilIndexMap::new(setup.pattern.clone());
        let (extension, ordering) = chordal_extension(&setup.pattern);
        let cliques = merge_cliques(&maximal_cliques(&extension, &ordering)?, clique_threshold)?;
        // Merging unions clique-tree neighbors, so a block may span pairs the
        // raw extension lacks; the consensus rows run over the pair union of
        // the merged blocks, which is the (still chordal) pattern the
        // decomposition actually lives on.
        let map_c = TrilIndexMap::new(cliques.pair_union());
        let (quadratic, linear, constant) = energy_from_factors(&factors, &map_e)?;
        let cons = assemble_constraints(&setup.nullspace, &setup.rhs, &map_e, &map_c, &cliques)?;
        let galerkin = galerkin_matrix(l, &setup.samples);
        let initial_x = map_e.compress(&galerkin)?;
        Ok(CoarseningProblem {
            map_e,
            map_c,
            cliques,
            energy: EnergyModel {
                quadratic,
                linear,
                constant,
                factors,
                modes,
            },
            cons,
            initial_x,
        })
    }

    pub fn n_x(&self) -> usize {
        self.map_e.len()
    }

    pub fn n_chordal(&self) -> usize {
        self.map_c.len()
    }

    pub fn n_nullspace(&self) -> usize {
        self.cons.nullspace.len()
    }

    pub fn z_len(&self) -> usize {
        self.cons.z_len
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.energy.objective(x)
    }

    /// Block slice bounds of clique `k` in the concatenated block vector.
    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.cons.offsets[k];
        start..start + self.cliques.cliques()[k].tril_len()
    }

    /// Per-clique PSD projections of a pattern iterate's principal
    /// submatrices, in concatenated block layout.
    pub fn projected_blocks(&self, x: &[f64]) -> Vec<f64> {
        let dense = self.map_e.expand(x);
        let mut z = vec![0.0; self.cons.z_len];
        for (k, clique) in self.cliques.cliques().iter().enumerate() {
            let s = clique.len();
            let sub = DMatrix::from_fn(s, s, |r, c| {
                dense[(clique.vertices()[r], clique.vertices()[c])]
            });
            let proj = psd_project(&sub);
            let range = self.block_range(k);
            let slice = &mut z[range];
            for (a, &(li, lj)) in clique.tril().pattern().entries().iter().enumerate() {
                slice[a] = proj[(li, lj)];
            }
        }
        z
    }

    /// Residual of the null-space rows: (X v) - e per coarse vertex.
    pub fn nullspace_residual(&self, x: &[f64]) -> Vec<f64> {
        self.cons
            .nullspace_rows
            .iter()
            .zip(&self.cons.rhs)
            .map(|(row, &e)| row.iter().map(|&(a, coef)| coef * x[a]).sum::<f64>() - e)
            .collect()
    }

    /// Shifts each diagonal entry so the null-space rows hold exactly:
    /// X_ii -= ((X v)_i - e_i) / v_i.  Off-diagonals are untouched, and the
    /// rows are independent, so one pass suffices.
    pub fn repair_nullspace(&self, x: &mut [f64]) {
        let residual = self.nullspace_residual(x);
        for (i, r) in residual.into_iter().enumerate() {
            let a = self.map_e.forward(i, i).expect("diagonal in pattern");
            x[a] -= r / self.cons.nullspace[i];
        }
    }
}
