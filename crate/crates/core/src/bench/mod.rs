//! Seeded benchmark harness, configuration and exports.

pub mod config;
pub mod export;
pub mod harness;

pub use config::{BenchConfig, Column, ConeSpec, ResolvedBench, SolverParams, Transform};
pub use export::{cluster_count, export_pareto_points, export_table, pareto_points, ParetoSummary, TableFormat};
pub use harness::{run_benchmark, run_cell, run_cell_traces, start_for, BenchOutput, BenchmarkRow, Cell, RunSummary};
