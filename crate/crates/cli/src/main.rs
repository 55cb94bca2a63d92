//! Command-line front end: coarsen a mesh operator end to end, evaluate an
//! existing coarsening, or inspect the chordal structure of a pattern.
//!
//! Exit codes are part of the contract: 0 on success (for `coarsen`, a
//! converged solve), 2 when the solver hits its iteration cap, 1 on any
//! error.  All JSON and CSV artifacts are byte-identical across reruns of
//! the same configuration; wall-clock timings go to their own file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod chordal_info;
mod config;
mod evaluate;
mod pipeline;

#[derive(Parser)]
#[command(
    name = "opcoarsen",
    version,
    about = "Spectral coarsening of sparse PSD geometric operators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coarsen a mesh operator and write every artifact to a directory.
    Coarsen(CoarsenArgs),
    /// Evaluate spectral preservation for an already-computed coarsening.
    Eval(EvalArgs),
    /// Report chordality, fill, and clique statistics for a pattern.
    ChordalInfo(ChordalInfoArgs),
}

#[derive(Args)]
pub struct CoarsenArgs {
    /// JSON config file; explicit flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Triangle mesh in OBJ format.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Number of coarse vertices.
    #[arg(long)]
    pub coarse: Option<usize>,
    /// Sparsity radius in cluster-adjacency rings (1, 2, or 3).
    #[arg(long)]
    pub rings: Option<usize>,
    /// Number of preserved low-frequency eigenpairs.
    #[arg(long)]
    pub eigs: Option<usize>,
    /// Weight each mode by its inverse eigenvalue in the energy.
    #[arg(long)]
    pub weighted: bool,
    /// Upper bound on merged clique block size.
    #[arg(long)]
    pub clique_size: Option<usize>,
    /// Initial penalty of the splitting solver.
    #[arg(long)]
    pub rho0: Option<f64>,
    /// Iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Absolute convergence tolerance.
    #[arg(long)]
    pub eps_abs: Option<f64>,
    /// Relative convergence tolerance.
    #[arg(long)]
    pub eps_rel: Option<f64>,
    /// Seed for farthest-point sampling.
    #[arg(long)]
    pub seed: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Fine operator, Matrix Market symmetric coordinate.
    #[arg(long)]
    pub fine_l: PathBuf,
    /// Fine lumped mass (diagonal), Matrix Market.
    #[arg(long)]
    pub fine_m: PathBuf,
    /// Coarse operator, Matrix Market.
    #[arg(long)]
    pub coarse_l: PathBuf,
    /// Coarse lumped mass (diagonal), Matrix Market.
    #[arg(long)]
    pub coarse_m: PathBuf,
    /// Restriction file (R.json with the sample indices).
    #[arg(long)]
    pub restriction: PathBuf,
    /// Number of eigenpairs to compare.
    #[arg(long)]
    pub eigs: usize,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ChordalInfoArgs {
    /// Sparsity pattern as a Matrix Market file.
    #[arg(long, conflicts_with = "mesh")]
    pub pattern: Option<PathBuf>,
    /// Triangle mesh whose vertex adjacency supplies the pattern.
    #[arg(long, requires = "rings")]
    pub mesh: Option<PathBuf>,
    /// Adjacency power applied to the mesh pattern.
    #[arg(long)]
    pub rings: Option<usize>,
    /// Upper bound on merged clique block size.
    #[arg(long, default_value_t = 200)]
    pub clique_size: usize,
    /// Optional file for the JSON report, in addition to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a completed command reports back to the shell.
pub enum Outcome {
    Done,
    IterationBudget,
}

fn main() -> ExitCode {
    // Parse by hand so usage errors exit 1; code 2 is reserved for a solve
    // that hits its iteration cap.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) if err.use_stderr() => {
            let _ = err.print();
            return ExitCode::FAILURE;
        }
        Err(help_or_version) => {
            let _ = help_or_version.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Coarsen(args) => pipeline::run(&args),
        Command::Eval(args) => evaluate::run(&args),
        Command::ChordalInfo(args) => chordal_info::run(&args),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::IterationBudget) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
