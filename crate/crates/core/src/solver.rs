//! Descent drivers. Every algorithm is a choice of direction strategy plus a
//! step rule over the shared subproblem and line-search machinery.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::{Evaluator, StartPair, VectorProblem};
use crate::stepsize::{
    armijo_search, bb_alpha, mm_search, AcceptedCondition, AlphaVector, LineSearchParams, LineSearchResult,
    DEFAULT_ALPHA_MAX, DEFAULT_ALPHA_MIN,
};
use crate::subproblem::{direction_from_jacobian, DirectionStrategy, QpSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    /// Steepest descent with a line search.
    #[serde(rename = "SDVO")]
    Sdvo,
    /// Barzilai-Borwein scaled rows with a line search.
    #[serde(rename = "BBDVO")]
    Bbdvo,
    /// Normalised gradient rows with a line search.
    #[serde(rename = "EDVO")]
    Edvo,
    /// Every row divided by one constant `L`, unit steps.
    #[serde(rename = "MM-fixed-L")]
    MmFixedL,
    /// Row `i` divided by `<A_i, ell>`, unit steps.
    #[serde(rename = "MM-ell")]
    MmEll,
    /// Same scales as `MmEll`, stated over the base `conv{A_i}`.
    #[serde(rename = "MM-ell-base")]
    MmEllBase,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] =
        [Self::Sdvo, Self::Bbdvo, Self::Edvo, Self::MmFixedL, Self::MmEll, Self::MmEllBase];

    pub fn label(self) -> &'static str {
        match self {
            Self::Sdvo => "SDVO",
            Self::Bbdvo => "BBDVO",
            Self::Edvo => "EDVO",
            Self::MmFixedL => "MM-fixed-L",
            Self::MmEll => "MM-ell",
            Self::MmEllBase => "MM-ell-base",
        }
    }

    /// Unit steps without any line search.
    pub fn is_majorization(self) -> bool {
        matches!(self, Self::MmFixedL | Self::MmEll | Self::MmEllBase)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|a| a.label().to_ascii_lowercase() == key)
            .ok_or_else(|| Error::Unknown { kind: "algorithm", name: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSearchKind {
    Armijo,
    Mm,
}

impl FromStr for LineSearchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "armijo" => Ok(Self::Armijo),
            "mm" | "majorization" => Ok(Self::Mm),
            _ => Err(Error::Unknown { kind: "line search", name: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub cone: PolyhedralCone,
    /// Replace the cone matrix by its gradient-scaled version at `x0`.
    pub scaled: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub line_search: LineSearchKind,
    pub ls: LineSearchParams,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub qp: QpSettings,
    /// Constant for `MmFixedL`; defaults to `max_i <A_i, ell>`.
    pub fixed_l: Option<f64>,
    /// Keep per-iteration records.
    pub record: bool,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, cone: PolyhedralCone) -> Self {
        Self {
            algorithm,
            cone,
            scaled: false,
            tol: 1e-6,
            max_iter: 500,
            line_search: LineSearchKind::Armijo,
            ls: LineSearchParams::default(),
            alpha_min: DEFAULT_ALPHA_MIN,
            alpha_max: DEFAULT_ALPHA_MAX,
            qp: QpSettings::default(),
            fixed_l: None,
            record: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::config("direction tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be at least 1"));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max) {
            return Err(Error::config("need 0 < alpha_min < alpha_max"));
        }
        if let Some(l) = self.fixed_l {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::config("fixed L must be positive"));
            }
        }
        self.ls.validate()
    }
}

/// Per-row divisors of the majorization variants, for the cone actually used.
pub fn strategy_alpha(cfg: &SolverConfig, cone: &PolyhedralCone, problem: &VectorProblem) -> Result<DVector<f64>> {
    let l = cone.rows();
    let a_ell = || -> Result<DVector<f64>> {
        let certs = problem.certificates_for(cone).ok_or_else(|| {
            Error::config(format!("{} needs a smoothness vector for {} under {}", cfg.algorithm, problem.name(), cone.name()))
        })?;
        let v = cone.matrix() * &certs.ell;
        if v.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::config("smoothness vector must pair positively with every row"));
        }
        Ok(v)
    };
    match cfg.algorithm {
        Algorithm::MmFixedL => {
            let big_l = match cfg.fixed_l {
                Some(v) => v,
                None => a_ell()?.max(),
            };
            Ok(DVector::from_element(l, big_l))
        }
        Algorithm::MmEll | Algorithm::MmEllBase => a_ell(),
        other => Err(Error::config(format!("{other} has no fixed row scales"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stationary,
    MaxIter,
    LinesearchFailure,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Stationary => "stationary",
            Self::MaxIter => "max_iter",
            Self::LinesearchFailure => "linesearch_failure",
        })
    }
}

/// State at the start of iteration `k` and the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub fx: Vec<f64>,
    pub d: Vec<f64>,
    pub dnorm: f64,
    pub lambda: Vec<f64>,
    pub t: f64,
    pub trials: usize,
    pub accepted: AcceptedCondition,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<AlphaVector>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scales: Option<Vec<f64>>,
    pub qp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub problem: String,
    pub algorithm: Algorithm,
    pub cone: String,
    /// Rows of the transform matrix actually used (after scaling).
    pub cone_rows: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    pub x_prev: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub iterations: usize,
    pub fevals: usize,
    pub jevals: usize,
    pub wall_ms: f64,
    pub x_final: Vec<f64>,
    pub f_final: Vec<f64>,
    pub final_dnorm: f64,
    /// Any BB scalar hit a clamp or the zero-curvature branch.
    pub clamped: bool,
}

impl SolveTrace {
    /// `x_0, x_1, ..., x_final` (needs recorded iterations).
    pub fn iterates(&self) -> Vec<DVector<f64>> {
        let mut xs: Vec<DVector<f64>> = self.records.iter().map(|r| DVector::from_column_slice(&r.x)).collect();
        xs.push(DVector::from_column_slice(&self.x_final));
        xs
    }

    /// `F(x_0), ..., F(x_final)`.
    pub fn values(&self) -> Vec<DVector<f64>> {
        let mut fs: Vec<DVector<f64>> = self.records.iter().map(|r| DVector::from_column_slice(&r.fx)).collect();
        fs.push(DVector::from_column_slice(&self.f_final));
        fs
    }

    pub fn cone_matrix(&self) -> DMatrix<f64> {
        let l = self.cone_rows.len();
        let m = self.cone_rows.first().map_or(0, Vec::len);
        DMatrix::from_fn(l, m, |i, j| self.cone_rows[i][j])
    }

    /// Writes a header line, one line per iteration and a summary line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let header = json!({
            "type": "header",
            "problem": self.problem,
            "algorithm": self.algorithm,
            "cone": self.cone,
            "cone_rows": self.cone_rows,
            "x0": self.x0,
            "x_prev": self.x_prev,
        });
        writeln!(out, "{header}")?;
        for r in &self.records {
            let mut line = serde_json::to_value(r)?;
            line["type"] = json!("iteration");
            writeln!(out, "{line}")?;
        }
        let summary = json!({
            "type": "summary",
            "termination": self.termination,
            "iterations": self.iterations,
            "fevals": self.fevals,
            "jevals": self.jevals,
            "wall_ms": self.wall_ms,
            "x_final": self.x_final,
            "f_final": self.f_final,
            "final_dnorm": self.final_dnorm,
            "clamped": self.clamped,
        });
        writeln!(out, "{summary}")?;
        Ok(())
    }

    /// Inverse of [`SolveTrace::write_jsonl`].
    pub fn read_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |m: &str| Error::config(format!("malformed trace: {m}"));
        let header: serde_json::Value = serde_json::from_str(lines.next().ok_or_else(|| bad("empty"))?)?;
        if header["type"] != "header" {
            return Err(bad("first line is not a header"));
        }
        let mut records = Vec::new();
        let mut summary = None;
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line)?;
            match v["type"].as_str() {
                Some("iteration") => records.push(serde_json::from_value(v)?),
                Some("summary") => summary = Some(v),
                _ => return Err(bad("unknown line type")),
            }
        }
        let s = summary.ok_or_else(|| bad("missing summary"))?;
        Ok(Self {
            problem: serde_json::from_value(header["problem"].clone())?,
            algorithm: serde_json::from_value(header["algorithm"].clone())?,
            cone: serde_json::from_value(header["cone"].clone())?,
            cone_rows: serde_json::from_value(header["cone_rows"].clone())?,
            x0: serde_json::from_value(header["x0"].clone())?,
            x_prev: serde_json::from_value(header["x_prev"].clone())?,
            records,
            termination: serde_json::from_value(s["termination"].clone())?,
            iterations: serde_json::from_value(s["iterations"].clone())?,
            fevals: serde_json::from_value(s["fevals"].clone())?,
            jevals: serde_json::from_value(s["jevals"].clone())?,
            wall_ms: serde_json::from_value(s["wall_ms"].clone())?,
            x_final: serde_json::from_value(s["x_final"].clone())?,
            f_final: serde_json::from_value(s["f_final"].clone())?,
            final_dnorm: serde_json::from_value(s["final_dnorm"].clone())?,
            clamped: serde_json::from_value(s["clamped"].clone())?,
        })
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Runs one descent from `start`. Line-search failure ends the run with the
/// matching termination; a non-finite iterate is an error carrying the trace.
pub fn run(cfg: &SolverConfig, problem: &VectorProblem, start: &StartPair) -> Result<SolveTrace> {
    cfg.validate()?;
    if cfg.cone.dim() != problem.m() {
        return Err(Error::DimensionMismatch { expected: problem.m(), actual: cfg.cone.dim() });
    }
    let clock = Instant::now();
    let mut eval = Evaluator::new(problem);
    let cone = if cfg.scaled {
        eval.jevals += 1;
        cfg.cone.scaled_transform(problem, &start.x0)?
    } else {
        cfg.cone.clone()
    };
    let a = cone.matrix().clone();
    let l = cone.rows();
    let fixed_scales = if cfg.algorithm.is_majorization() { Some(strategy_alpha(cfg, &cone, problem)?) } else { None };

    let mut trace = SolveTrace {
        problem: problem.name().to_string(),
        algorithm: cfg.algorithm,
        cone: cone.name().to_string(),
        cone_rows: rows_of(&a),
        x0: start.x0.as_slice().to_vec(),
        x_prev: start.x_prev.as_slice().to_vec(),
        records: Vec::new(),
        termination: Termination::MaxIter,
        iterations: 0,
        fevals: 0,
        jevals: 0,
        wall_ms: 0.0,
        x_final: Vec::new(),
        f_final: Vec::new(),
        final_dnorm: f64::NAN,
        clamped: false,
    };

    let mut x = start.x0.clone();
    // the starting value is not charged to the run
    let mut fx = problem.evaluate(&x)?;
    let mut jac = eval.jac(&x)?;
    let (mut x_prev, mut jac_prev) = if cfg.algorithm == Algorithm::Bbdvo {
        (start.x_prev.clone(), eval.jac(&start.x_prev)?)
    } else {
        (x.clone(), jac.clone())
    };

    let mut k = 0;
    let termination = loop {
        let alpha = if cfg.algorithm == Algorithm::Bbdvo {
            let s = &x - &x_prev;
            let av = if s.norm_squared() == 0.0 {
                AlphaVector::ones(l)
            } else {
                bb_alpha(&s, &(&a * (&jac - &jac_prev)), cfg.alpha_min, cfg.alpha_max)?
            };
            trace.clamped |= !av.is_scale_covariant();
            Some(av)
        } else {
            None
        };
        let strategy = match (cfg.algorithm, &alpha, &fixed_scales) {
            (Algorithm::Sdvo, _, _) => DirectionStrategy::Steepest,
            (Algorithm::Edvo, _, _) => DirectionStrategy::Equiangular,
            (Algorithm::Bbdvo, Some(av), _) => DirectionStrategy::BarzilaiBorwein(av.as_vector()),
            (_, _, Some(s)) => DirectionStrategy::FixedScale(s.clone()),
            _ => unreachable!("every algorithm has a strategy"),
        };
        let dir = direction_from_jacobian(&jac, &cone, &strategy, &cfg.qp)?;
        trace.final_dnorm = dir.dnorm;
        if dir.dnorm <= cfg.tol {
            break Termination::Stationary;
        }
        if k >= cfg.max_iter {
            break Termination::MaxIter;
        }
        let row_products = &a * (&jac * &dir.d);
        let step: Result<LineSearchResult> = if fixed_scales.is_some() {
            eval.eval(&(&x + &dir.d)).map(|f_new| LineSearchResult {
                t: 1.0,
                trials: 1,
                accepted: AcceptedCondition::Fixed,
                f_new,
            })
        } else {
            match cfg.line_search {
                LineSearchKind::Armijo => armijo_search(&mut eval, &cone, &x, &fx, &dir.d, &row_products, &cfg.ls),
                LineSearchKind::Mm => {
                    let weights = alpha.as_ref().map_or_else(|| DVector::from_element(l, 1.0), AlphaVector::as_vector);
                    mm_search(&mut eval, &cone, &x, &fx, &dir.d, &row_products, &weights, &cfg.ls)
                }
            }
        };
        let step = match step {
            Ok(s) => s,
            Err(Error::LineSearchFailed { .. }) => break Termination::LinesearchFailure,
            Err(Error::NonFinite { .. }) => {
                trace.x_final = x.as_slice().to_vec();
                trace.f_final = fx.as_slice().to_vec();
                trace.iterations = k;
                trace.fevals = eval.fevals;
                trace.jevals = eval.jevals;
                return Err(Error::NonFiniteIterate { trace: Box::new(trace) });
            }
            Err(e) => return Err(e),
        };
        let x_new = &x + &dir.d * step.t;
        if cfg.record {
            trace.records.push(IterationRecord {
                k,
                x: x.as_slice().to_vec(),
                fx: fx.as_slice().to_vec(),
                d: dir.d.as_slice().to_vec(),
                dnorm: dir.dnorm,
                lambda: dir.lambda.as_slice().to_vec(),
                t: step.t,
                trials: step.trials,
                accepted: step.accepted,
                alpha,
                scales: fixed_scales.as_ref().map(|s| s.as_slice().to_vec()),
                qp_iterations: dir.iterations,
            });
        }
        let new_jac = match eval.jac(&x_new) {
            Ok(j) => j,
            Err(Error::NonFinite { .. }) => {
                trace.x_final = x_new.as_slice().to_vec();
                trace.f_final = step.f_new.as_slice().to_vec();
                trace.iterations = k + 1;
                trace.fevals = eval.fevals;
                trace.jevals = eval.jevals;
                return Err(Error::NonFiniteIterate { trace: Box::new(trace) });
            }
            Err(e) => return Err(e),
        };
        x_prev = std::mem::replace(&mut x, x_new);
        jac_prev = std::mem::replace(&mut jac, new_jac);
        fx = step.f_new;
        k += 1;
    };

    trace.termination = termination;
    trace.iterations = k;
    trace.fevals = eval.fevals;
    trace.jevals = eval.jevals;
    trace.x_final = x.as_slice().to_vec();
    trace.f_final = fx.as_slice().to_vec();
    trace.wall_ms = clock.elapsed().as_secs_f64() * 1e3;
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvarianceVerdict {
    Pass,
    Fail,
    /// A BB scalar was clamped in one of the runs, so equality is not expected.
    InconclusiveClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub max_direction_deviation: f64,
    pub steps_identical: bool,
    pub iterations: (usize, usize),
    pub verdict: InvarianceVerdict,
}

pub const INVARIANCE_TOL: f64 = 1e-8;

/// Runs BBDVO from the same start under two transform matrices of the same
/// cone and compares directions and step sizes iteration by iteration.
pub fn transform_invariance_check(
    problem: &VectorProblem,
    a1: &PolyhedralCone,
    a2: &PolyhedralCone,
    start: &StartPair,
    cfg: &SolverConfig,
) -> Result<InvarianceReport> {
    let mut c1 = cfg.clone();
    c1.algorithm = Algorithm::Bbdvo;
    c1.record = true;
    c1.cone = a1.clone();
    let mut c2 = c1.clone();
    c2.cone = a2.clone();
    let t1 = run(&c1, problem, start)?;
    let t2 = run(&c2, problem, start)?;
    let mut max_dev: f64 = 0.0;
    for (r1, r2) in t1.records.iter().zip(&t2.records) {
        let dev = DVector::from_column_slice(&r1.d) - DVector::from_column_slice(&r2.d);
        max_dev = max_dev.max(dev.norm());
    }
    let steps_identical = t1.records.len() == t2.records.len()
        && t1.records.iter().zip(&t2.records).all(|(r1, r2)| r1.t == r2.t);
    let verdict = if t1.clamped || t2.clamped {
        InvarianceVerdict::InconclusiveClamped
    } else if max_dev <= INVARIANCE_TOL && steps_identical {
        InvarianceVerdict::Pass
    } else {
        InvarianceVerdict::Fail
    };
    Ok(InvarianceReport {
        max_direction_deviation: max_dev,
        steps_identical,
        iterations: (t1.iterations, t2.iterations),
        verdict,
    })
}
