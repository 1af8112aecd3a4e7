//! Benchmark configuration files (TOML).
//!
//! ```toml
//! name = "table2"
//! runs = 200
//! seed = 42
//! problems = ["BK1", "DD1"]        # or ["all"]
//!
//! [[cones]]
//! name = "R2+"                     # R2+, K1, K2, or any label with explicit rows
//! # rows = [[5.0, -1.0], [-1.0, 5.0]]
//!
//! [[columns]]
//! algorithm = "SDVO"
//! transform = "Ahat"               # "A" (default) or "Ahat"
//!
//! [solver]
//! max_iter = 500
//! sigma = 1e-4
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::{problem_by_name, VectorProblem, PROBLEM_NAMES};
use crate::solver::{Algorithm, LineSearchKind, SolverConfig};
use crate::stepsize::{LineSearchParams, DEFAULT_ALPHA_MAX, DEFAULT_ALPHA_MIN};
use crate::subproblem::QpSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub problems: Vec<String>,
    pub cones: Vec<ConeSpec>,
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub solver: SolverParams,
}

fn default_name() -> String {
    "bench".into()
}

fn default_runs() -> usize {
    200
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSpec {
    pub name: String,
    #[serde(default)]
    pub rows: Option<Vec<Vec<f64>>>,
}

impl ConeSpec {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), rows: None }
    }

    pub fn build(&self) -> Result<PolyhedralCone> {
        match &self.rows {
            Some(rows) => PolyhedralCone::from_rows(self.name.clone(), rows),
            None => PolyhedralCone::by_name(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Transform {
    #[default]
    A,
    Ahat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub algorithm: String,
    #[serde(default)]
    pub transform: Transform,
}

/// Solver settings shared by every cell; any field can be overridden from the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverParams {
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: String,
    pub sigma: f64,
    pub gamma: f64,
    pub jmax: u32,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
    pub fixed_l: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        let ls = LineSearchParams::default();
        let qp = QpSettings::default();
        Self {
            tol: 1e-6,
            max_iter: 500,
            line_search: "armijo".into(),
            sigma: ls.sigma,
            gamma: ls.gamma,
            jmax: ls.jmax,
            alpha_min: DEFAULT_ALPHA_MIN,
            alpha_max: DEFAULT_ALPHA_MAX,
            qp_tol: qp.tol,
            qp_max_iter: qp.max_iter,
            fixed_l: None,
        }
    }
}

impl SolverParams {
    /// Solver configuration for one cell.
    pub fn solver_config(&self, algorithm: Algorithm, cone: PolyhedralCone, transform: Transform) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(algorithm, cone);
        cfg.scaled = transform == Transform::Ahat;
        cfg.tol = self.tol;
        cfg.max_iter = self.max_iter;
        cfg.line_search = self.line_search.parse::<LineSearchKind>()?;
        cfg.ls = LineSearchParams { sigma: self.sigma, gamma: self.gamma, jmax: self.jmax };
        cfg.alpha_min = self.alpha_min;
        cfg.alpha_max = self.alpha_max;
        cfg.qp.tol = self.qp_tol;
        cfg.qp.max_iter = self.qp_max_iter;
        cfg.fixed_l = self.fixed_l;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A column of a results table: an algorithm and which transform matrix it uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Column {
    pub algorithm: Algorithm,
    pub transform: Transform,
}

/// Configuration with every name resolved.
#[derive(Debug, Clone)]
pub struct ResolvedBench {
    pub name: String,
    pub runs: usize,
    pub seed: u64,
    pub problems: Vec<VectorProblem>,
    pub cones: Vec<PolyhedralCone>,
    pub columns: Vec<Column>,
    pub solver: SolverParams,
}

impl BenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Resolves every problem, cone and algorithm name and validates the
    /// solver settings, so that no run starts with a bad configuration.
    pub fn resolve(&self) -> Result<ResolvedBench> {
        let names: Vec<&str> = if self.problems.iter().any(|p| p.eq_ignore_ascii_case("all")) {
            PROBLEM_NAMES.to_vec()
        } else {
            self.problems.iter().map(String::as_str).collect()
        };
        let problems = names.iter().map(|n| problem_by_name(n)).collect::<Result<Vec<_>>>()?;
        let cones = self.cones.iter().map(ConeSpec::build).collect::<Result<Vec<_>>>()?;
        let columns = self
            .columns
            .iter()
            .map(|c| Ok(Column { algorithm: c.algorithm.parse()?, transform: c.transform }))
            .collect::<Result<Vec<_>>>()?;
        if problems.is_empty() || cones.is_empty() || columns.is_empty() {
            return Err(Error::config("need at least one problem, cone and column"));
        }
        for p in &problems {
            for c in &cones {
                if c.dim() != p.m() {
                    return Err(Error::config(format!(
                        "cone {} has dimension {} but {} has {} objectives",
                        c.name(),
                        c.dim(),
                        p.name(),
                        p.m()
                    )));
                }
            }
        }
        for col in &columns {
            self.solver.solver_config(col.algorithm, cones[0].clone(), col.transform)?;
        }
        Ok(ResolvedBench {
            name: self.name.clone(),
            runs: self.runs,
            seed: self.seed,
            problems,
            cones,
            columns,
            solver: self.solver.clone(),
        })
    }
}

/// Table label of a transform: `A0`, `Ahat1`, ... for the named cones
/// (0 = orthant, 1 = K1, 2 = K2) and `A[name]` otherwise.
pub fn transform_label(cone: &PolyhedralCone, transform: Transform) -> String {
    let idx = match cone.name() {
        "R2+" => "0".to_string(),
        "K1" => "1".to_string(),
        "K2" => "2".to_string(),
        other => format!("[{other}]"),
    };
    match transform {
        Transform::A => format!("A{idx}"),
        Transform::Ahat => format!("Ahat{idx}"),
    }
}
