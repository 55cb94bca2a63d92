//! Spectral-preservation metrics: the functional map between a fine and a
//! coarse eigenbasis, commutativity and orthonormality norms, per-index
//! eigenvalue errors, and biharmonic distances.
//!
//! Norms are reported as the square roots of the summed-squares
//! expressions; artifacts record this convention explicitly.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::eig::{EigenBasis, NULL_EIGENVALUE_FACTOR};
use crate::meshops::Restriction;
use crate::numfmt::format_g17;

/// Floor for relative eigenvalue errors, guarding the zero mode.
pub const EIGENVALUE_ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{0}")]
    Dimension(String),
    #[error("functional map is identically zero")]
    ZeroMap,
    #[error("source vertex {vertex} out of range for {n} vertices")]
    SourceOutOfRange { vertex: usize, n: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Inner-product matrix between a coarse and a fine eigenbasis, with the
/// eigenvalues carried along for the commutativity norm.
#[derive(Clone, Debug)]
pub struct FunctionalMap {
    /// C, k x k after truncating both bases to the smaller k.
    pub c: DMatrix<f64>,
    /// Fine eigenvalues, truncated.
    pub fine_values: Vec<f64>,
    /// Coarse eigenvalues, truncated.
    pub coarse_values: Vec<f64>,
    /// True when the bases had different sizes; callers may want to warn.
    pub truncated: bool,
}

/// C = (coarse basis)' Mc R (fine basis): how coarse modes express the
/// restricted fine modes in the coarse mass inner product.
pub fn functional_map(
    coarse_basis: &EigenBasis,
    coarse_mass: &[f64],
    restriction: &Restriction,
    fine_basis: &EigenBasis,
) -> Result<FunctionalMap, MetricsError> {
    let m = coarse_basis.n();
    if coarse_mass.len() != m || restriction.m() != m {
        return Err(MetricsError::Dimension(format!(
            "coarse dimensions disagree: basis {m}, mass {}, restriction {}",
            coarse_mass.len(),
            restriction.m()
        )));
    }
    if restriction.n_fine != fine_basis.n() {
        return Err(MetricsError::Dimension(format!(
            "restriction expects {} fine rows, fine basis has {}",
            restriction.n_fine,
            fine_basis.n()
        )));
    }
    let k = coarse_basis.k().min(fine_basis.k());
    let truncated = coarse_basis.k() != fine_basis.k();
    let mut restricted = restriction.select_rows(fine_basis.vectors());
    for (r, &mass) in coarse_mass.iter().enumerate() {
        for c in 0..restricted.ncols() {
            restricted[(r, c)] *= mass;
        }
    }
    let full = coarse_basis.vectors().transpose() * restricted;
    let c = full.view((0, 0), (k, k)).into_owned();
    Ok(FunctionalMap {
        c,
        fine_values: fine_basis.values()[..k].to_vec(),
        coarse_values: coarse_basis.values()[..k].to_vec(),
        truncated,
    })
}

/// sqrt(||C L - Lc C||_F^2 / ||C||_F^2) with L, Lc the diagonal eigenvalue
/// matrices; zero exactly when the map commutes with the spectra.
pub fn laplacian_commutativity(fm: &FunctionalMap) -> Result<f64, MetricsError> {
    let k = fm.c.nrows();
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for i in 0..k {
        for j in 0..k {
            let defect = fm.c[(i, j)] * fm.fine_values[j] - fm.coarse_values[i] * fm.c[(i, j)];
            numerator += defect * defect;
            denominator += fm.c[(i, j)] * fm.c[(i, j)];
        }
    }
    if denominator == 0.0 {
        return Err(MetricsError::ZeroMap);
    }
    Ok((numerator / denominator).sqrt())
}

/// ||C'C - I||_F: zero exactly when the map is orthonormal.
pub fn orthonormality(fm: &FunctionalMap) -> f64 {
    let k = fm.c.ncols();
    let gram = fm.c.transpose() * &fm.c;
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k {
            let defect = gram[(i, j)] - if i == j { 1.0 } else { 0.0 };
            sum += defect * defect;
        }
    }
    sum.sqrt()
}

/// Per-index relative eigenvalue errors |coarse - fine| / max(fine, floor),
/// over the common prefix.
pub fn eigenvalue_errors(fine: &[f64], coarse: &[f64]) -> Vec<f64> {
    fine.iter()
        .zip(coarse)
        .map(|(&f, &c)| (c - f).abs() / f.max(EIGENVALUE_ERROR_FLOOR))
        .collect()
}

/// Biharmonic distance from a source vertex: d(i)^2 sums
/// (phi_k(i) - phi_k(source))^2 / lambda_k^2 over the non-null modes.
pub fn biharmonic_distance(basis: &EigenBasis, source: usize) -> Result<Vec<f64>, MetricsError> {
    let n = basis.n();
    if source >= n {
        return Err(MetricsError::SourceOutOfRange { vertex: source, n });
    }
    let threshold = NULL_EIGENVALUE_FACTOR * basis.max_value();
    let mut distances = vec![0.0; n];
    for (k, &lambda) in basis.values().iter().enumerate() {
        if lambda <= threshold {
            continue;
        }
        let at_source = basis.vectors()[(source, k)];
        for i in 0..n {
            let diff = basis.vectors()[(i, k)] - at_source;
            distances[i] += diff * diff / (lambda * lambda);
        }
    }
    for d in &mut distances {
        *d = d.sqrt();
    }
    Ok(distances)
}

/// Summary serialized to metrics.json.
#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    #[serde(rename = "norm_L")]
    pub norm_l: f64,
    #[serde(rename = "norm_D")]
    pub norm_d: f64,
    pub k: usize,
    pub truncated: bool,
    /// Norms are square roots of summed squares; recorded so downstream
    /// comparisons know the convention.
    pub convention: String,
    pub eigenvalue_error_max: f64,
    pub eigenvalue_error_mean: f64,
    pub eigenvalue_errors_csv_path: Option<String>,
}

impl MetricsReport {
    pub fn from_map(fm: &FunctionalMap) -> Result<Self, MetricsError> {
        let errors = eigenvalue_errors(&fm.fine_values, &fm.coarse_values);
        let max = errors.iter().fold(0.0f64, |m, &e| m.max(e));
        let mean = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };
        Ok(MetricsReport {
            norm_l: laplacian_commutativity(fm)?,
            norm_d: orthonormality(fm),
            k: fm.c.nrows(),
            truncated: fm.truncated,
            convention: "unsquared (square roots of the summed-squares forms)".into(),
            eigenvalue_error_max: max,
            eigenvalue_error_mean: mean,
            eigenvalue_errors_csv_path: None,
        })
    }
}

pub fn write_metrics_json(
    report: &MetricsReport,
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// index,fine,coarse,rel_error rows over the common prefix of both spectra.
pub fn write_eigenvalue_errors_csv(
    fine: &[f64],
    coarse: &[f64],
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    let errors = eigenvalue_errors(fine, coarse);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "index,fine,coarse,rel_error")?;
    for (i, err) in errors.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{}",
            i,
            format_g17(fine[i]),
            format_g17(coarse[i]),
            format_g17(*err)
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Dense Matrix Market array export of the functional map, column major,
/// for external heat-map plotting.
pub fn write_functional_map_mm(
    c: &DMatrix<f64>,
    path: impl AsRef<Path>,
) -> Result<(), MetricsError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", c.nrows(), c.ncols())?;
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            writeln!(out, "{}", format_g17(c[(i, j)]))?;
        }
    }
    out.flush()?;
    Ok(())
}
