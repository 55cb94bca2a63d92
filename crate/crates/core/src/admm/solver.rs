//! Consensus splitting loop with adaptive penalty, block-parallel PSD
//! projections, and deterministic reporting.
//!
//! Per iteration: a KKT solve updates the pattern unknowns, each clique
//! block is projected onto the PSD cone, and the scaled duals absorb the
//! disagreement.  The penalty grows or shrinks when the primal and dual
//! residuals drift apart, and the KKT factorization is rebuilt only when
//! the penalty actually changes.
//!
//! Internally the block iterates store off-diagonal entries scaled by
//! sqrt(2), so their two-norm is the Frobenius norm of the expanded
//! matrices and the eigenvalue clamp is an exact proximal step in the
//! iteration metric.  Public solutions carry plain entries.
//!
//! Everything that lands in the trace and the report is a pure function of
//! the problem and parameters; wall-clock timings are kept separate so the
//! serialized artifacts are bit-stable across runs.

use std::f64::consts::SQRT_2;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use crate::eig::{extreme_eigenvalues, psd_project};
use crate::numfmt::format_g17;
use crate::sparsemat::SymSparse;

use super::assemble::CoarseningProblem;
use super::kkt::{factorize, KktFactorization};
use super::AdmmError;

/// Final iterates are eigen-checked densely only up to this dimension.
const CERT_DENSE_LIMIT: usize = 4000;
/// Null-space certificate: |X v - e| <= this times (1 + max |X|).
const NULLSPACE_CERT_TOL: f64 = 1e-8;
/// PSD certificate: lambda_min >= -this times lambda_max.
const PSD_CERT_FACTOR: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct AdmmParams {
    /// Initial penalty.
    pub rho0: f64,
    /// Residual-ratio threshold that triggers a penalty change.
    pub mu: f64,
    /// Penalty growth factor when the primal residual dominates.
    pub tau_incr: f64,
    /// Penalty shrink factor when the dual residual dominates.
    pub tau_decr: f64,
    /// Absolute tolerance, scaled by the square root of the block dimension.
    pub eps_abs: f64,
    /// Relative tolerance against the iterate norms.
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Upper bound on merged clique block size.
    pub clique_threshold: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            rho0: 10.0,
            mu: 10.0,
            tau_incr: 2.0,
            tau_decr: 2.0,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iter: 5000,
            clique_threshold: 200,
        }
    }
}

impl AdmmParams {
    pub fn validate(&self) -> Result<(), AdmmError> {
        let bad = |msg: &str| Err(AdmmError::BadParams(msg.into()));
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return bad("rho0 must be positive and finite");
        }
        if !(self.mu > 0.0) {
            return bad("mu must be positive");
        }
        if !(self.tau_incr >= 1.0) || !(self.tau_decr >= 1.0) {
            return bad("tau factors must be at least 1");
        }
        if !(self.eps_abs >= 0.0) || !(self.eps_rel >= 0.0) {
            return bad("tolerances must be nonnegative");
        }
        if self.eps_abs == 0.0 && self.eps_rel == 0.0 {
            return bad("at least one tolerance must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if self.clique_threshold == 0 {
            return bad("clique_threshold must be at least 1");
        }
        Ok(())
    }
}

/// Standard residual-balancing rule: grow the penalty when the primal
/// residual exceeds `mu` times the dual one, shrink it in the mirror case.
pub fn adapt_penalty(rho: f64, r_norm: f64, s_norm: f64, params: &AdmmParams) -> f64 {
    if r_norm > params.mu * s_norm {
        rho * params.tau_incr
    } else if s_norm > params.mu * r_norm {
        rho / params.tau_decr
    } else {
        rho
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Converged,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RhoUpdate {
    pub iteration: usize,
    pub rho: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Counters {
    pub factorizations: usize,
    pub x_solves: usize,
    pub z_projections: usize,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Timings {
    pub ms_factorize: f64,
    pub ms_x: f64,
    pub ms_z: f64,
    pub ms_total: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub rho: f64,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StepInfo {
    pub iteration: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    /// Penalty in effect during this step (before any adaptation).
    pub rho: f64,
    pub objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct VarCounts {
    pub pattern: usize,
    pub chordal: usize,
    pub blocks: usize,
    pub nullspace: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificate {
    /// max |X v - e| after the diagonal repair.
    pub nullspace_residual: f64,
    pub nullspace_ok: bool,
    /// Extreme eigenvalues of the final iterate (dense check; None when the
    /// matrix exceeds the dense certificate limit).
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub psd_ok: Option<bool>,
    /// Smallest eigenvalue across the final clique blocks.
    pub min_block_eigenvalue: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub termination: TerminationReason,
    pub iterations: usize,
    pub r_norm: f64,
    pub s_norm: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub objective: f64,
    pub rho_final: f64,
    pub rho_updates: Vec<RhoUpdate>,
    pub factorizations: usize,
    pub x_solves: usize,
    pub z_projections: usize,
    pub max_kkt_residual: f64,
    pub kkt_regularized: bool,
    pub clique_count: usize,
    pub clique_size_min: usize,
    pub clique_size_max: usize,
    pub variables: VarCounts,
    /// Spectral modes in the energy after null-mode dropping.
    pub modes: usize,
    pub params: AdmmParams,
    pub certificate: Certificate,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    #[serde(skip)]
    pub timings: Timings,
}

pub struct Solution {
    /// Final iterate on the target pattern, null-space repaired.
    pub x: SymSparse,
    /// Final clique blocks, concatenated.
    pub z: Vec<f64>,
    pub report: SolveReport,
}

pub struct AdmmRun<'a> {
    problem: &'a CoarseningProblem,
    params: AdmmParams,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    rho: f64,
    iteration: usize,
    kkt: Option<KktFactorization>,
    kkt_ever_regularized: bool,
    counters: Counters,
    timings: Timings,
    trace: Vec<TraceRow>,
    rho_updates: Vec<RhoUpdate>,
    max_kkt_residual: f64,
    workers: usize,
    last: Option<StepInfo>,
}

/// Per block entry: sqrt(2) off the diagonal, one on it.  Scaling by these
/// makes the concatenated block vector's two-norm equal the Frobenius norm
/// of the expanded clique matrices.
fn svec_weights(problem: &CoarseningProblem) -> Vec<f64> {
    let mut w = Vec::with_capacity(problem.z_len());
    for clique in problem.cliques.cliques() {
        for &(li, lj) in clique.tril().pattern().entries() {
            w.push(if li == lj { 1.0 } else { SQRT_2 });
        }
    }
    w
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|&a| a * a).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&p, &q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn worker_count(blocks: usize) -> usize {
    let available = std::env::var("COARSEN_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&w| w >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|p| p.get())
                .unwrap_or(1)
        });
    available.min(blocks).max(1)
}

impl<'a> AdmmRun<'a> {
    pub fn new(problem: &'a CoarseningProblem, params: AdmmParams) -> Result<Self, AdmmError> {
        params.validate()?;
        let x = problem.initial_x.clone();
        let mut z = problem.projected_blocks(&x);
        for (v, w) in z.iter_mut().zip(svec_weights(problem)) {
            *v *= w;
        }
        let u = vec![0.0; problem.z_len()];
        let y = z.clone();
        let rho = params.rho0;
        let workers = worker_count(problem.cliques.len());
        Ok(AdmmRun {
            problem,
            params,
            x,
            z,
            u,
            y,
            rho,
            iteration: 0,
            kkt: None,
            kkt_ever_regularized: false,
            counters: Counters::default(),
            timings: Timings::default(),
            trace: Vec::new(),
            rho_updates: Vec::new(),
            max_kkt_residual: 0.0,
            workers,
            last: None,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn rho_updates(&self) -> &[RhoUpdate] {
        &self.rho_updates
    }

    /// One full cycle: KKT solve, block projections, dual update, residuals,
    /// and (if not converged) penalty adaptation.
    pub fn step(&mut self) -> Result<StepInfo, AdmmError> {
        let t_total = Instant::now();
        let iteration = self.iteration + 1;
        if self.kkt.as_ref().map_or(true, |k| k.rho != self.rho) {
            let t = Instant::now();
            let factorization = factorize(self.problem, self.rho)?;
            self.kkt_ever_regularized |= factorization.regularized;
            self.kkt = Some(factorization);
            self.counters.factorizations += 1;
            self.timings.ms_factorize += ms(t);
        }
        let kkt = self.kkt.as_ref().expect("factorization present");
        let n_x = self.problem.n_x();
        let n_c = self.problem.n_chordal();
        let n_m = self.problem.n_nullspace();
        let z_len = self.problem.z_len();

        let t_x = Instant::now();
        let mut rhs = DVector::zeros(n_x + n_c + n_m);
        rhs.rows_mut(0, n_x).copy_from(&self.problem.energy.linear);
        for r in 0..n_c {
            rhs[n_x + r] = self.problem.cons.block_cols[r]
                .iter()
                .map(|&c| self.z[c] - self.u[c])
                .sum();
        }
        for i in 0..n_m {
            rhs[n_x + n_c + i] = self.problem.cons.rhs[i];
        }
        let (sol, kkt_residual) = kkt.solve_refined(&rhs)?;
        self.counters.x_solves += 1;
        self.max_kkt_residual = self.max_kkt_residual.max(kkt_residual);
        self.x.copy_from_slice(&sol.as_slice()[..n_x]);
        for c in 0..z_len {
            let mu1 = sol[n_x + self.problem.cons.col_row[c]];
            self.y[c] = self.z[c] - self.u[c] + mu1 / self.rho;
        }
        self.timings.ms_x += ms(t_x);

        let t_z = Instant::now();
        let z_old = self.z.clone();
        let mut arg = vec![0.0; z_len];
        for c in 0..z_len {
            arg[c] = self.y[c] + self.u[c];
        }
        project_blocks(self.problem, &arg, &mut self.z, self.workers);
        self.counters.z_projections += self.problem.cliques.len();
        self.timings.ms_z += ms(t_z);

        for c in 0..z_len {
            self.u[c] += self.y[c] - self.z[c];
        }

        let r_norm = l2_diff(&self.y, &self.z);
        let s_norm = self.rho * l2_diff(&self.z, &z_old);
        let sqrt_dim = (z_len as f64).sqrt();
        let eps_pri =
            sqrt_dim * self.params.eps_abs + self.params.eps_rel * l2(&self.y).max(l2(&self.z));
        let eps_dual =
            sqrt_dim * self.params.eps_abs + self.params.eps_rel * self.rho * l2(&self.u);
        let objective = self.problem.objective(&self.x);
        if !(r_norm.is_finite() && s_norm.is_finite() && objective.is_finite()) {
            return Err(AdmmError::NonFinite { iteration });
        }
        let rho_used = self.rho;
        self.trace.push(TraceRow {
            iter: iteration,
            r_norm,
            s_norm,
            rho: rho_used,
            objective,
        });
        let converged = r_norm <= eps_pri && s_norm <= eps_dual;
        if !converged {
            let next = adapt_penalty(self.rho, r_norm, s_norm, &self.params);
            if next != self.rho {
                // The scaled dual tracks mu/rho; keep the underlying
                // multiplier continuous across the penalty change.
                let scale = self.rho / next;
                for v in &mut self.u {
                    *v *= scale;
                }
                self.rho = next;
                self.rho_updates.push(RhoUpdate {
                    iteration,
                    rho: next,
                });
            }
        }
        self.iteration = iteration;
        self.timings.ms_total += ms(t_total);
        let info = StepInfo {
            iteration,
            r_norm,
            s_norm,
            eps_pri,
            eps_dual,
            rho: rho_used,
            objective,
            kkt_residual,
            converged,
        };
        self.last = Some(info);
        Ok(info)
    }

    /// Repairs the null-space rows, certifies the iterate, and packages the
    /// report.
    pub fn finish(mut self, termination: TerminationReason) -> Result<Solution, AdmmError> {
        let t_total = Instant::now();
        // Back to plain entries: the published blocks sum to the pattern
        // values without any scaling caveat.
        for (v, w) in self.z.iter_mut().zip(svec_weights(self.problem)) {
            *v /= w;
        }
        self.problem.repair_nullspace(&mut self.x);
        let x = SymSparse::new(self.problem.map_e.pattern().clone(), self.x.clone())?;
        let residual_inf = self
            .problem
            .nullspace_residual(&self.x)
            .iter()
            .fold(0.0f64, |acc, &r| acc.max(r.abs()));
        let nullspace_ok = residual_inf <= NULLSPACE_CERT_TOL * (1.0 + x.max_abs());
        let m = self.problem.map_e.pattern().n();
        let (lambda_min, lambda_max, psd_ok) = if m <= CERT_DENSE_LIMIT {
            let dense = self.problem.map_e.expand(&self.x);
            let (lo, hi) = extreme_eigenvalues(&dense);
            (
                Some(lo),
                Some(hi),
                Some(lo >= -PSD_CERT_FACTOR * hi.max(0.0)),
            )
        } else {
            (None, None, None)
        };
        let mut min_block = f64::INFINITY;
        for (k, clique) in self.problem.cliques.cliques().iter().enumerate() {
            let range = self.problem.block_range(k);
            let local = clique.tril().expand(&self.z[range]);
            let (lo, _) = extreme_eigenvalues(&local);
            min_block = min_block.min(lo);
        }
        let (size_min, size_max, _) = self.problem.cliques.size_stats();
        let last = self.last;
        self.timings.ms_total += ms(t_total);
        let report = SolveReport {
            termination,
            iterations: self.iteration,
            r_norm: last.map_or(0.0, |i| i.r_norm),
            s_norm: last.map_or(0.0, |i| i.s_norm),
            eps_pri: last.map_or(0.0, |i| i.eps_pri),
            eps_dual: last.map_or(0.0, |i| i.eps_dual),
            objective: self.problem.objective(&self.x),
            rho_final: self.rho,
            rho_updates: self.rho_updates,
            factorizations: self.counters.factorizations,
            x_solves: self.counters.x_solves,
            z_projections: self.counters.z_projections,
            max_kkt_residual: self.max_kkt_residual,
            kkt_regularized: self.kkt_ever_regularized,
            clique_count: self.problem.cliques.len(),
            clique_size_min: size_min,
            clique_size_max: size_max,
            variables: VarCounts {
                pattern: self.problem.n_x(),
                chordal: self.problem.n_chordal(),
                blocks: self.problem.z_len(),
                nullspace: self.problem.n_nullspace(),
            },
            modes: self.problem.energy.modes,
            params: self.params.clone(),
            certificate: Certificate {
                nullspace_residual: residual_inf,
                nullspace_ok,
                lambda_min,
                lambda_max,
                psd_ok,
                min_block_eigenvalue: min_block,
            },
            trace: self.trace,
            timings: self.timings,
        };
        Ok(Solution {
            x,
            z: self.z,
            report,
        })
    }
}

/// Runs the loop to convergence or the iteration cap.
pub fn solve(problem: &CoarseningProblem, params: &AdmmParams) -> Result<Solution, AdmmError> {
    let mut run = AdmmRun::new(problem, params.clone())?;
    let mut termination = TerminationReason::MaxIterations;
    for _ in 0..params.max_iter {
        let info = run.step()?;
        if info.converged {
            termination = TerminationReason::Converged;
            break;
        }
    }
    run.finish(termination)
}

/// Projects every clique block of `arg` onto the PSD cone, writing into `z`.
/// Blocks are disjoint slices, so worker threads write without contention
/// and the result does not depend on the thread count.
fn project_blocks(problem: &CoarseningProblem, arg: &[f64], z: &mut [f64], workers: usize) {
    let cliques = problem.cliques.cliques();
    let mut slices: Vec<&mut [f64]> = Vec::with_capacity(cliques.len());
    let mut rest = z;
    for clique in cliques {
        let (head, tail) = rest.split_at_mut(clique.tril_len());
        slices.push(head);
        rest = tail;
    }
    debug_assert!(rest.is_empty());
    let mut tasks: Vec<(usize, &mut [f64])> = slices.into_iter().enumerate().collect();
    if workers <= 1 || tasks.len() <= 1 {
        for (k, slice) in tasks {
            project_one(problem, k, arg, slice);
        }
        return;
    }
    let chunk = tasks.len().div_ceil(workers);
    std::thread::scope(|scope| {
        while !tasks.is_empty() {
            let take = chunk.min(tasks.len());
            let batch: Vec<(usize, &mut [f64])> = tasks.drain(..take).collect();
            scope.spawn(move || {
                for (k, slice) in batch {
                    project_one(problem, k, arg, slice);
                }
            });
        }
    });
}

fn project_one(problem: &CoarseningProblem, k: usize, arg: &[f64], out: &mut [f64]) {
    let clique = &problem.cliques.cliques()[k];
    let range = problem.block_range(k);
    let entries = clique.tril().pattern().entries();
    // Undo the off-diagonal sqrt(2) scaling, clamp the eigenvalues, and
    // scale back; in these coordinates the clamp is the exact prox.
    let mut plain = arg[range].to_vec();
    for (v, &(li, lj)) in plain.iter_mut().zip(entries) {
        if li != lj {
            *v /= SQRT_2;
        }
    }
    let proj = psd_project(&clique.tril().expand(&plain));
    for (a, &(li, lj)) in entries.iter().enumerate() {
        let w = if li == lj { 1.0 } else { SQRT_2 };
        out[a] = w * proj[(li, lj)];
    }
}

/// Writes the iteration trace as CSV; purely value-derived, so byte-stable.
pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<(), AdmmError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,r_norm,s_norm,rho,objective")?;
    for row in trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            row.iter,
            format_g17(row.r_norm),
            format_g17(row.s_norm),
            format_g17(row.rho),
            format_g17(row.objective)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_report_json(report: &SolveReport, path: impl AsRef<Path>) -> Result<(), AdmmError> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Wall-clock numbers live in their own artifact so the report and trace
/// stay run-to-run identical.
pub fn write_timings_json(timings: &Timings, path: impl AsRef<Path>) -> Result<(), AdmmError> {
    let mut text = serde_json::to_string_pretty(timings)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
