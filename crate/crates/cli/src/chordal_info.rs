//! The chordal-info subcommand: chordality, fill, and clique statistics for
//! a sparsity pattern, taken from a Matrix Market file or a mesh adjacency.

use anyhow::{bail, Context, Result};
use coarsen_core::chordal::{
    chordal_extension, is_chordal, maximal_cliques, merge_cliques, CliqueSet,
};
use coarsen_core::meshops::load_obj;
use coarsen_core::sparsemat::{SymPattern, SymSparse};
use serde::Serialize;

use crate::{ChordalInfoArgs, Outcome};

#[derive(Debug, Serialize)]
struct CliqueStats {
    count: usize,
    size_min: usize,
    size_max: usize,
    size_mean: f64,
}

impl CliqueStats {
    fn of(cliques: &CliqueSet) -> Self {
        let (size_min, size_max, size_mean) = cliques.size_stats();
        CliqueStats {
            count: cliques.len(),
            size_min,
            size_max,
            size_mean,
        }
    }
}

#[derive(Debug, Serialize)]
struct ChordalReport {
    n: usize,
    is_chordal: bool,
    /// Off-diagonal pairs in the input pattern.
    pattern_edges: usize,
    /// Off-diagonal pairs the extension added.
    fill_edges: usize,
    cliques: CliqueStats,
    merged: CliqueStats,
}

fn off_diagonal_count(p: &SymPattern) -> usize {
    p.entries().iter().filter(|&&(i, j)| i != j).count()
}

pub fn run(args: &ChordalInfoArgs) -> Result<Outcome> {
    let pattern = match (&args.pattern, &args.mesh) {
        (Some(path), None) => SymSparse::mm_read(path)
            .with_context(|| format!("reading pattern {}", path.display()))?
            .pattern()
            .clone(),
        (None, Some(path)) => {
            let rings = args.rings.expect("clap enforces --rings with --mesh");
            if !(1..=3).contains(&rings) {
                bail!("rings must be 1, 2, or 3 (got {rings})");
            }
            let (mesh, _) =
                load_obj(path).with_context(|| format!("loading mesh {}", path.display()))?;
            mesh.edge_pattern().power(rings)
        }
        _ => bail!("give exactly one of --pattern or --mesh"),
    };
    if args.clique_size == 0 {
        bail!("clique size bound must be positive");
    }

    let chordal_input = is_chordal(&pattern);
    let (extension, ordering) = chordal_extension(&pattern);
    let cliques = maximal_cliques(&extension, &ordering)?;
    let merged = merge_cliques(&cliques, args.clique_size)?;
    let report = ChordalReport {
        n: pattern.n(),
        is_chordal: chordal_input,
        pattern_edges: off_diagonal_count(&pattern),
        fill_edges: off_diagonal_count(&extension) - off_diagonal_count(&pattern),
        cliques: CliqueStats::of(&cliques),
        merged: CliqueStats::of(&merged),
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Done)
}
