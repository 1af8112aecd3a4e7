//! Seeded benchmark runs. The `k`-th start of a problem depends only on the
//! master seed and `k`, so every algorithm and cone sees the same starts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{transform_label, Column, ResolvedBench, SolverParams};
use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::{derive_seed, StartPair, VectorProblem};
use crate::solver::{run, SolveTrace, Termination};

/// One aggregated table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub problem: String,
    pub cone: String,
    pub algorithm: String,
    pub transform: String,
    pub iter: f64,
    pub feval: f64,
    pub time_ms: f64,
    /// Runs ending at the iteration cap, in a failed line search, or in an error.
    pub failures: usize,
}

/// Outcome of a single run, kept small so that large benchmarks stay cheap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub fevals: usize,
    pub wall_ms: f64,
    /// `None` when the run ended in an error.
    pub termination: Option<Termination>,
    pub f_final: Vec<f64>,
}

impl RunSummary {
    pub fn failed(&self) -> bool {
        !matches!(self.termination, Some(Termination::Stationary))
    }

    fn from_result(res: &Result<SolveTrace>) -> Self {
        match res {
            Ok(t) => Self {
                iterations: t.iterations,
                fevals: t.fevals,
                wall_ms: t.wall_ms,
                termination: Some(t.termination),
                f_final: t.f_final.clone(),
            },
            Err(Error::NonFiniteIterate { trace }) => Self {
                iterations: trace.iterations,
                fevals: trace.fevals,
                wall_ms: trace.wall_ms,
                termination: None,
                f_final: trace.f_final.clone(),
            },
            Err(_) => Self { iterations: 0, fevals: 0, wall_ms: 0.0, termination: None, f_final: Vec::new() },
        }
    }
}

/// The `k`-th start of `problem` under master seed `seed`.
pub fn start_for(problem: &VectorProblem, seed: u64, k: usize) -> StartPair {
    problem.sample_start(derive_seed(seed, k as u64))
}

/// A `(problem, cone, column)` cell.
#[derive(Debug, Clone)]
pub struct Cell<'a> {
    pub problem: &'a VectorProblem,
    pub cone: &'a PolyhedralCone,
    pub column: Column,
}

/// Full traces of `runs` seeded runs of one cell, in start order.
pub fn run_cell_traces(
    cell: &Cell<'_>,
    params: &SolverParams,
    runs: usize,
    seed: u64,
    record: bool,
    jobs: usize,
) -> Result<Vec<Result<SolveTrace>>> {
    let mut cfg = params.solver_config(cell.column.algorithm, cell.cone.clone(), cell.column.transform)?;
    cfg.record = record;
    let task = |k: usize| run(&cfg, cell.problem, &start_for(cell.problem, seed, k));
    with_pool(jobs, || (0..runs).into_par_iter().map(task).collect())
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

/// Aggregated results plus the runs that ended in an error.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutput {
    pub rows: Vec<BenchmarkRow>,
    pub errors: usize,
    /// `(row index, erroring runs)` for every row with at least one error.
    pub error_rows: Vec<(usize, usize)>,
}

/// Runs every cell of the benchmark. `jobs = 0` uses all cores.
pub fn run_benchmark(bench: &ResolvedBench, jobs: usize) -> Result<BenchOutput> {
    let mut cells = Vec::new();
    for problem in &bench.problems {
        for cone in &bench.cones {
            for &column in &bench.columns {
                let cfg = bench.solver.solver_config(column.algorithm, cone.clone(), column.transform)?;
                cells.push((problem, cone, column, cfg));
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..bench.runs).map(move |k| (c, k))).collect();
    let summaries: Vec<RunSummary> = with_pool(jobs, || {
        tasks
            .par_iter()
            .map(|&(c, k)| {
                let (problem, _, _, cfg) = &cells[c];
                let mut cfg = cfg.clone();
                cfg.record = false;
                RunSummary::from_result(&run(&cfg, problem, &start_for(problem, bench.seed, k)))
            })
            .collect()
    })?;
    let mut rows = Vec::with_capacity(cells.len());
    let mut error_rows = Vec::new();
    for (c, (problem, cone, column, _)) in cells.iter().enumerate() {
        let chunk = &summaries[c * bench.runs..(c + 1) * bench.runs];
        let errs = chunk.iter().filter(|s| s.termination.is_none()).count();
        if errs > 0 {
            error_rows.push((c, errs));
        }
        rows.push(aggregate(problem, cone, *column, chunk));
    }
    let errors = error_rows.iter().map(|e| e.1).sum();
    Ok(BenchOutput { rows, errors, error_rows })
}

/// Arithmetic means over the given runs, failures included.
pub fn aggregate(problem: &VectorProblem, cone: &PolyhedralCone, column: Column, runs: &[RunSummary]) -> BenchmarkRow {
    let n = runs.len().max(1) as f64;
    BenchmarkRow {
        problem: problem.name().to_string(),
        cone: cone.name().to_string(),
        algorithm: column.algorithm.label().to_string(),
        transform: transform_label(cone, column.transform),
        iter: runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
        feval: runs.iter().map(|r| r.fevals as f64).sum::<f64>() / n,
        time_ms: runs.iter().map(|r| r.wall_ms).sum::<f64>() / n,
        failures: runs.iter().filter(|r| r.failed()).count(),
    }
}

/// Summaries of `runs` seeded runs of one cell.
pub fn run_cell(cell: &Cell<'_>, params: &SolverParams, runs: usize, seed: u64, jobs: usize) -> Result<Vec<RunSummary>> {
    Ok(run_cell_traces(cell, params, runs, seed, false, jobs)?.iter().map(RunSummary::from_result).collect())
}
