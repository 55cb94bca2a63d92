//! Run configuration: JSON file merged with command-line flags, flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use coarsen_core::admm::AdmmParams;
use serde::Deserialize;

use crate::CoarsenArgs;

/// Optional mirror of the coarsen flags, as stored in a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mesh: Option<PathBuf>,
    pub coarse: Option<usize>,
    pub rings: Option<usize>,
    pub eigs: Option<usize>,
    pub weighted: Option<bool>,
    pub clique_size: Option<usize>,
    pub rho0: Option<f64>,
    pub max_iter: Option<usize>,
    pub eps_abs: Option<f64>,
    pub eps_rel: Option<f64>,
    pub seed: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Fully resolved settings for one coarsening run.
#[derive(Debug)]
pub struct RunConfig {
    pub mesh: PathBuf,
    pub coarse: usize,
    pub rings: usize,
    pub eigs: usize,
    pub weighted: bool,
    pub clique_size: usize,
    pub admm: AdmmParams,
    pub seed: usize,
    pub out: PathBuf,
}

/// Merges file and flags (flags win), fills defaults, and validates the
/// settings that do not need the mesh.
pub fn resolve(args: &CoarsenArgs) -> Result<RunConfig> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let defaults = AdmmParams::default();
    let clique_size = args
        .clique_size
        .or(file.clique_size)
        .unwrap_or(defaults.clique_threshold);
    let config = RunConfig {
        mesh: args
            .mesh
            .clone()
            .or(file.mesh)
            .context("no mesh given (--mesh or config)")?,
        coarse: args
            .coarse
            .or(file.coarse)
            .context("no coarse vertex count given (--coarse or config)")?,
        rings: args.rings.or(file.rings).unwrap_or(1),
        eigs: args.eigs.or(file.eigs).unwrap_or(100),
        // The flag can only switch weighting on; absent, the file decides.
        weighted: args.weighted || file.weighted.unwrap_or(false),
        clique_size,
        admm: AdmmParams {
            rho0: args.rho0.or(file.rho0).unwrap_or(defaults.rho0),
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(defaults.max_iter),
            eps_abs: args.eps_abs.or(file.eps_abs).unwrap_or(defaults.eps_abs),
            eps_rel: args.eps_rel.or(file.eps_rel).unwrap_or(defaults.eps_rel),
            clique_threshold: clique_size,
            ..defaults
        },
        seed: args.seed.or(file.seed).unwrap_or(0),
        out: args
            .out
            .clone()
            .or(file.out)
            .context("no output directory given (--out or config)")?,
    };
    if !(1..=3).contains(&config.rings) {
        bail!("rings must be 1, 2, or 3 (got {})", config.rings);
    }
    if config.coarse == 0 {
        bail!("coarse vertex count must be positive");
    }
    if config.eigs == 0 {
        bail!("eigenpair count must be positive");
    }
    Ok(config)
}
