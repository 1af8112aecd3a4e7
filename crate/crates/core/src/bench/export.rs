//! Table and value-space exports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::{Column, SolverParams, Transform};
use super::harness::{run_cell_traces, BenchmarkRow, Cell};
use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::VectorProblem;
use crate::solver::Algorithm;

/// Column order of every table export.
pub const TABLE_COLUMNS: [&str; 8] =
    ["problem", "cone", "algorithm", "transform", "iter", "feval", "time_ms", "failures"];

/// Value-space radius under which terminal points are merged into one cluster.
pub const CLUSTER_RADIUS: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Csv,
    Json,
    Markdown,
}

impl TableFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
            Self::Markdown => "md",
        }
    }
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(Error::Unknown { kind: "table format", name: s.to_string() }),
        }
    }
}

pub fn write_table<W: Write>(rows: &[BenchmarkRow], format: TableFormat, out: W) -> Result<()> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(TABLE_COLUMNS)?;
            for r in rows {
                w.write_record([
                    r.problem.clone(),
                    r.cone.clone(),
                    r.algorithm.clone(),
                    r.transform.clone(),
                    r.iter.to_string(),
                    r.feval.to_string(),
                    r.time_ms.to_string(),
                    r.failures.to_string(),
                ])?;
            }
            w.flush()?;
        }
        TableFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
        TableFormat::Markdown => {
            let mut out = out;
            writeln!(out, "| {} |", TABLE_COLUMNS.join(" | "))?;
            writeln!(out, "|{}", "---|".repeat(TABLE_COLUMNS.len()))?;
            for r in rows {
                writeln!(
                    out,
                    "| {} | {} | {} | {} | {:.2} | {:.2} | {:.3} | {} |",
                    r.problem, r.cone, r.algorithm, r.transform, r.iter, r.feval, r.time_ms, r.failures
                )?;
            }
        }
    }
    Ok(())
}

pub fn export_table(rows: &[BenchmarkRow], format: TableFormat, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_table(rows, format, file)
}

/// Reads a CSV table written by [`export_table`].
pub fn read_table_csv(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TABLE_COLUMNS {
        return Err(Error::config(format!("unexpected table header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Number of single-linkage clusters of `points` at `radius`.
pub fn cluster_count(points: &[Vec<f64>], radius: f64) -> usize {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let dist = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dist <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub run: usize,
    pub f1: f64,
    pub f2: f64,
    pub termination: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSummary {
    pub points: Vec<ParetoPoint>,
    pub clusters: usize,
}

/// Terminal value-space points of `runs` seeded runs; only for two objectives.
pub fn pareto_points(
    problem: &VectorProblem,
    cone: &PolyhedralCone,
    algorithm: Algorithm,
    runs: usize,
    seed: u64,
    params: &SolverParams,
    jobs: usize,
) -> Result<ParetoSummary> {
    if problem.m() != 2 {
        return Err(Error::Unsupported(format!("value-space export needs 2 objectives, {} has {}", problem.name(), problem.m())));
    }
    let cell = Cell { problem, cone, column: Column { algorithm, transform: Transform::A } };
    let traces = run_cell_traces(&cell, params, runs, seed, false, jobs)?;
    let mut points = Vec::with_capacity(runs);
    for (run, res) in traces.into_iter().enumerate() {
        let (f, tag) = match res {
            Ok(t) => (t.f_final, t.termination.to_string()),
            Err(Error::NonFiniteIterate { trace }) => (trace.f_final, "error".to_string()),
            Err(e) => return Err(e),
        };
        points.push(ParetoPoint { run, f1: f[0], f2: f[1], termination: tag });
    }
    let finite: Vec<Vec<f64>> = points
        .iter()
        .filter(|p| p.f1.is_finite() && p.f2.is_finite())
        .map(|p| vec![p.f1, p.f2])
        .collect();
    let clusters = cluster_count(&finite, CLUSTER_RADIUS);
    Ok(ParetoSummary { points, clusters })
}

/// Writes `run,f1,f2,termination` rows followed by a `# clusters=` summary line.
pub fn write_pareto_csv<W: Write>(summary: &ParetoSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["run", "f1", "f2", "termination"])?;
    for p in &summary.points {
        w.write_record([p.run.to_string(), p.f1.to_string(), p.f2.to_string(), p.termination.clone()])?;
    }
    w.flush()?;
    let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    writeln!(out, "# clusters={} radius={CLUSTER_RADIUS:e}", summary.clusters)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn export_pareto_points(
    problem: &VectorProblem,
    cone: &PolyhedralCone,
    algorithm: Algorithm,
    runs: usize,
    seed: u64,
    params: &SolverParams,
    jobs: usize,
    out: &Path,
) -> Result<ParetoSummary> {
    let summary = pareto_points(problem, cone, algorithm, runs, seed, params, jobs)?;
    write_pareto_csv(&summary, BufWriter::new(File::create(out)?))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> BenchmarkRow {
        BenchmarkRow {
            problem: "BK1".into(),
            cone: "R2+".into(),
            algorithm: "BBDVO".into(),
            transform: "A0".into(),
            iter: 1.0,
            feval: 1.0,
            time_ms: 0.01,
            failures: 0,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_table(&[], TableFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "problem,cone,algorithm,transform,iter,feval,time_ms,failures\n");
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        export_table(&[row()], TableFormat::Csv, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
        assert_eq!(read_table_csv(&path).unwrap(), vec![row()]);
    }

    #[test]
    fn markdown_and_json() {
        let mut md = Vec::new();
        write_table(&[row()], TableFormat::Markdown, &mut md).unwrap();
        assert!(String::from_utf8(md).unwrap().contains("| BK1 | R2+ | BBDVO | A0 | 1.00 | 1.00 |"));
        let mut js = Vec::new();
        write_table(&[row()], TableFormat::Json, &mut js).unwrap();
        let back: Vec<BenchmarkRow> = serde_json::from_slice(&js).unwrap();
        assert_eq!(back, vec![row()]);
    }

    #[test]
    fn clusters() {
        let pts = vec![vec![0.0, 0.0], vec![0.0005, 0.0], vec![0.001, 0.0], vec![1.0, 1.0]];
        assert_eq!(cluster_count(&pts, 1e-3), 2);
        assert_eq!(cluster_count(&[], 1e-3), 0);
    }

    #[test]
    fn pareto_needs_two_objectives() {
        let p = crate::problems::linear(
            "three",
            nalgebra::DMatrix::identity(3, 2),
            nalgebra::DVector::zeros(3),
            nalgebra::DVector::from_element(2, -1.0),
            nalgebra::DVector::from_element(2, 1.0),
        )
        .unwrap();
        let cone = PolyhedralCone::orthant(3);
        let err = pareto_points(&p, &cone, Algorithm::Sdvo, 1, 0, &SolverParams::default(), 1).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn zero_runs_is_header_only() {
        let p = crate::problems::bk1();
        let s = pareto_points(&p, &PolyhedralCone::orthant(2), Algorithm::Bbdvo, 0, 0, &SolverParams::default(), 1).unwrap();
        let mut buf = Vec::new();
        write_pareto_csv(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "run,f1,f2,termination\n# clusters=0 radius=1e-3\n");
    }
}
