//! The eval subcommand: spectral-preservation metrics for a coarsening that
//! already exists on disk.

use std::path::Path;

use anyhow::{bail, Context, Result};
use coarsen_core::eig::{smallest_eigenpairs, EigenBasis};
use coarsen_core::meshops::Restriction;
use coarsen_core::metrics::{
    functional_map, write_eigenvalue_errors_csv, write_functional_map_mm, write_metrics_json,
    MetricsReport,
};
use coarsen_core::sparsemat::SymSparse;

use crate::pipeline::RestrictionFile;
use crate::{EvalArgs, Outcome};

/// Functional map plus both norms, written as metrics.json,
/// eigenvalue_errors.csv, and functional_map.mtx in `out`.  Warns when the
/// bases were truncated to a common mode count.
pub fn write_spectral_metrics(
    fine: &EigenBasis,
    coarse: &EigenBasis,
    coarse_mass: &[f64],
    restriction: &Restriction,
    out: &Path,
) -> Result<MetricsReport> {
    let fm = functional_map(coarse, coarse_mass, restriction, fine)?;
    if fm.truncated {
        eprintln!(
            "warning: bases have different sizes; metrics use the common {} modes",
            fm.c.nrows()
        );
    }
    let mut report = MetricsReport::from_map(&fm)?;
    report.eigenvalue_errors_csv_path = Some("eigenvalue_errors.csv".into());
    write_metrics_json(&report, out.join("metrics.json"))?;
    write_eigenvalue_errors_csv(
        fine.values(),
        coarse.values(),
        out.join("eigenvalue_errors.csv"),
    )?;
    write_functional_map_mm(&fm.c, out.join("functional_map.mtx"))?;
    eprintln!(
        "metrics: commutativity {:.6e}, orthonormality {:.6e} over {} modes",
        report.norm_l, report.norm_d, report.k
    );
    Ok(report)
}

fn load_operator_pair(operator: &Path, mass: &Path, side: &str) -> Result<(SymSparse, Vec<f64>)> {
    let op = SymSparse::mm_read(operator)
        .with_context(|| format!("reading {side} operator {}", operator.display()))?;
    let mass_matrix = SymSparse::mm_read(mass)
        .with_context(|| format!("reading {side} mass {}", mass.display()))?;
    let diag = mass_matrix
        .diagonal_values()
        .with_context(|| format!("{side} mass {} is not diagonal", mass.display()))?;
    if mass_matrix.n() != op.n() {
        bail!(
            "{side} operator is {}x{} but its mass is {}x{}",
            op.n(),
            op.n(),
            mass_matrix.n(),
            mass_matrix.n()
        );
    }
    Ok((op, diag))
}

pub fn run(args: &EvalArgs) -> Result<Outcome> {
    if args.eigs == 0 {
        bail!("eigenpair count must be positive");
    }
    let (fine_l, fine_m) = load_operator_pair(&args.fine_l, &args.fine_m, "fine")?;
    let (coarse_l, coarse_m) = load_operator_pair(&args.coarse_l, &args.coarse_m, "coarse")?;
    let restriction = RestrictionFile::load(&args.restriction)?;
    if restriction.n_fine != fine_l.n() {
        bail!(
            "restriction covers {} fine vertices but the fine operator has {}",
            restriction.n_fine,
            fine_l.n()
        );
    }
    if restriction.m() != coarse_l.n() {
        bail!(
            "restriction picks {} samples but the coarse operator has {} vertices",
            restriction.m(),
            coarse_l.n()
        );
    }
    if args.eigs > fine_l.n() {
        bail!(
            "eigs {} exceeds the fine vertex count {}",
            args.eigs,
            fine_l.n()
        );
    }
    let coarse_modes = args.eigs.min(coarse_l.n());
    let fine_basis = smallest_eigenpairs(&fine_l, &fine_m, args.eigs)?;
    let coarse_basis = smallest_eigenpairs(&coarse_l, &coarse_m, coarse_modes)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    write_spectral_metrics(
        &fine_basis,
        &coarse_basis,
        &coarse_m,
        &restriction,
        &args.out,
    )?;
    Ok(Outcome::Done)
}
