//! The coarsen subcommand: mesh to operator, solve, artifacts.
//!
//! Artifact set, all inside the output directory: L.mtx and M.mtx (the
//! normalized fine operator and mass), X.mtx and Mtilde.mtx (their coarse
//! counterparts), R.json (the sample indices), report.json, trace.csv,
//! metrics.json, eigenvalue_errors.csv, functional_map.mtx, and
//! timings.json.  Everything except timings.json is byte-stable across
//! reruns of the same configuration.

use std::path::Path;

use anyhow::{bail, Context, Result};
use coarsen_core::admm::{
    solve, write_report_json, write_timings_json, write_trace_csv, CoarseningProblem,
    TerminationReason,
};
use coarsen_core::eig::smallest_eigenpairs;
use coarsen_core::meshops::{
    cotan_laplacian, load_obj, lumped_mass, normalize_mesh, CoarseningSetup, Restriction,
};
use coarsen_core::sparsemat::{SymPattern, SymSparse};
use serde::{Deserialize, Serialize};

use crate::evaluate::write_spectral_metrics;
use crate::{config, CoarsenArgs, Outcome};

/// On-disk form of the restriction: which fine vertices the coarse ones are.
#[derive(Debug, Serialize, Deserialize)]
pub struct RestrictionFile {
    pub samples: Vec<usize>,
    pub n_fine: usize,
}

impl RestrictionFile {
    pub fn load(path: &Path) -> Result<Restriction> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading restriction {}", path.display()))?;
        let file: RestrictionFile = serde_json::from_str(&text)
            .with_context(|| format!("parsing restriction {}", path.display()))?;
        if file.samples.iter().any(|&s| s >= file.n_fine) {
            bail!(
                "restriction {} has sample indices outside its {} fine vertices",
                path.display(),
                file.n_fine
            );
        }
        Ok(Restriction::new(file.samples, file.n_fine))
    }

    pub fn save(restriction: &Restriction, path: &Path) -> Result<()> {
        let file = RestrictionFile {
            samples: restriction.samples.clone(),
            n_fine: restriction.n_fine,
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Diagonal mass vector as a writable sparse matrix.
fn mass_matrix(diag: &[f64]) -> Result<SymSparse> {
    Ok(SymSparse::new(
        SymPattern::diagonal(diag.len()),
        diag.to_vec(),
    )?)
}

pub fn run(args: &CoarsenArgs) -> Result<Outcome> {
    let config = config::resolve(args)?;
    let (raw, dropped) = load_obj(&config.mesh)
        .with_context(|| format!("loading mesh {}", config.mesh.display()))?;
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} degenerate faces");
    }
    let (mesh, scale) = normalize_mesh(&raw)?;
    let n = mesh.n_vertices();
    if config.coarse >= n {
        bail!(
            "coarse vertex count {} must be below the mesh vertex count {}",
            config.coarse,
            n
        );
    }
    if config.eigs > n {
        bail!("eigs {} exceeds the mesh vertex count {}", config.eigs, n);
    }
    if config.weighted && (config.eigs as f64) < 0.5 * config.coarse as f64 {
        eprintln!(
            "warning: weighted energy with eigs {} below half of coarse {}; \
             preserving more modes usually works better",
            config.eigs, config.coarse
        );
    }
    eprintln!(
        "mesh: {} vertices, {} faces, area normalization scale {scale:.6e}",
        n,
        mesh.faces.len()
    );

    let l = cotan_laplacian(&mesh)?;
    let mass = lumped_mass(&mesh)?;
    let fine_basis = smallest_eigenpairs(&l, &mass, config.eigs)?;
    let setup = CoarseningSetup::build(
        &mesh,
        l.pattern(),
        &mass,
        config.coarse,
        config.rings,
        config.seed,
    )?;
    let problem = CoarseningProblem::assemble(
        &l,
        &mass,
        &setup,
        &fine_basis,
        config.weighted,
        config.clique_size,
    )?;
    eprintln!(
        "problem: {} pattern unknowns, {} chordal rows, {} cliques, {} block entries",
        problem.n_x(),
        problem.n_chordal(),
        problem.cliques.len(),
        problem.z_len()
    );

    let solution = solve(&problem, &config.admm)?;
    let report = &solution.report;
    let verdict = match report.termination {
        TerminationReason::Converged => "converged",
        TerminationReason::MaxIterations => "hit the iteration cap",
    };
    eprintln!(
        "solve: {verdict} after {} iterations, objective {:.6e}, penalty {:.3e}",
        report.iterations, report.objective, report.rho_final
    );

    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("creating {}", config.out.display()))?;
    let out = config.out.as_path();
    l.mm_write(out.join("L.mtx"))?;
    mass_matrix(&mass)?.mm_write(out.join("M.mtx"))?;
    solution.x.mm_write(out.join("X.mtx"))?;
    mass_matrix(&setup.coarse_mass)?.mm_write(out.join("Mtilde.mtx"))?;
    RestrictionFile::save(&setup.restriction(), &out.join("R.json"))?;
    write_trace_csv(&report.trace, out.join("trace.csv"))?;
    write_report_json(report, out.join("report.json"))?;
    write_timings_json(&report.timings, out.join("timings.json"))?;

    let coarse_modes = config.eigs.min(config.coarse);
    let coarse_basis = smallest_eigenpairs(&solution.x, &setup.coarse_mass, coarse_modes)?;
    write_spectral_metrics(
        &fine_basis,
        &coarse_basis,
        &setup.coarse_mass,
        &setup.restriction(),
        out,
    )?;
    eprintln!("artifacts written to {}", out.display());

    match report.termination {
        TerminationReason::Converged => Ok(Outcome::Done),
        TerminationReason::MaxIterations => {
            eprintln!("warning: stopped before convergence; artifacts reflect the last iterate");
            Ok(Outcome::IterationBudget)
        }
    }
}
