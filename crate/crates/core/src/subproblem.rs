//! Direction finding. Every strategy reduces to the same dual problem: find the
//! minimum-norm point of `conv{M_1, ..., M_l}`, i.e. minimise `0.5 |M^T lambda|^2`
//! over the unit simplex, and take `d = -M^T lambda`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::VectorProblem;

/// Rows whose norm is at or below this are dropped by the equiangular strategy.
pub const ZERO_ROW_NORM: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionResult {
    pub d: DVector<f64>,
    pub lambda: DVector<f64>,
    pub dnorm: f64,
    /// Primal optimal value `-0.5 |d|^2`.
    pub theta: f64,
    pub fw_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DirectionResult {
    fn from_lambda(m: &DMatrix<f64>, lambda: DVector<f64>, iterations: usize, tol: f64) -> Self {
        let w = m.transpose() * &lambda;
        let fw_gap = duality_gap(m, &lambda, &w);
        let d = -w;
        let dnorm = d.norm();
        Self { theta: -0.5 * dnorm * dnorm, d, lambda, dnorm, fw_gap, iterations, converged: fw_gap <= tol }
    }
}

/// `<grad, lambda> - min_j grad_j` with `grad_j = <M_j, w>` and `w = M^T lambda`.
fn duality_gap(m: &DMatrix<f64>, lambda: &DVector<f64>, w: &DVector<f64>) -> f64 {
    let grad = m * w;
    let gmin = grad.min();
    (grad.dot(lambda) - gmin).max(0.0)
}

/// Settings of the simplex QP solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    /// Frank-Wolfe duality-gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Re-optimise over the active face after every vertex step (Wolfe's
    /// minor cycle). Plain Frank-Wolfe zig-zags and only reaches `O(1/k)`.
    pub corrective: bool,
    /// Use the closed form when there are exactly two rows.
    pub exact_two_rows: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000, corrective: true, exact_two_rows: true }
    }
}

/// Minimum-norm point of the convex hull of the rows of `m`, solved by
/// Frank-Wolfe from the uniform weights with exact line search and
/// smallest-index tie-breaking.
pub fn min_norm_simplex_qp(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DirectionResult> {
    let settings = QpSettings { tol, max_iter, ..QpSettings::default() };
    frank_wolfe(m, &settings)
}

pub fn frank_wolfe(m: &DMatrix<f64>, settings: &QpSettings) -> Result<DirectionResult> {
    let l = m.nrows();
    if l == 0 {
        return Err(Error::DimensionMismatch { expected: 1, actual: 0 });
    }
    if m.iter().any(|v| v.is_nan()) {
        return Err(Error::NanInSubproblem);
    }
    if !(settings.tol > 0.0) {
        return Err(Error::config("subproblem tolerance must be positive"));
    }
    let gram = m * m.transpose();
    // gaps below this are indistinguishable from rounding in `grad`
    let floor = 64.0 * f64::EPSILON * gram.diagonal().max();
    let tol = settings.tol.max(floor);

    let mut lambda = DVector::from_element(l, 1.0 / l as f64);
    let mut iterations = 0;
    loop {
        let grad = &gram * &lambda;
        let i = argmin(&grad);
        let gap = grad.dot(&lambda) - grad[i];
        if gap <= tol || iterations >= settings.max_iter {
            break;
        }
        iterations += 1;
        let mut p = -&lambda;
        p[i] += 1.0;
        let curv = p.dot(&(&gram * &p));
        let step = if curv > 0.0 { (gap / curv).clamp(0.0, 1.0) } else { 1.0 };
        lambda.axpy(step, &p, 1.0);
        project_simplex_roundoff(&mut lambda);
        if settings.corrective {
            minor_cycle(&gram, &mut lambda);
        }
    }
    let mut res = DirectionResult::from_lambda(m, lambda, iterations, settings.tol);
    res.converged = res.fw_gap <= tol;
    Ok(res)
}

fn argmin(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j] < v[best] {
            best = j;
        }
    }
    best
}

fn project_simplex_roundoff(lambda: &mut DVector<f64>) {
    for v in lambda.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s = lambda.sum();
    *lambda /= s;
}

fn objective(gram: &DMatrix<f64>, lambda: &DVector<f64>) -> f64 {
    0.5 * lambda.dot(&(gram * lambda))
}

/// Minimises over the affine hull of the current support, backing off to the
/// boundary and shrinking the support until the affine minimiser is feasible.
fn minor_cycle(gram: &DMatrix<f64>, lambda: &mut DVector<f64>) {
    let start = objective(gram, lambda);
    let saved = lambda.clone();
    let l = lambda.len();
    for _ in 0..=l {
        let support: Vec<usize> = (0..l).filter(|&j| lambda[j] > 0.0).collect();
        let Some(mu) = affine_minimizer(gram, &support) else {
            break;
        };
        if mu.iter().all(|&v| v > 0.0) {
            for (k, &j) in support.iter().enumerate() {
                lambda[j] = mu[k];
            }
            for j in (0..l).filter(|j| !support.contains(j)) {
                lambda[j] = 0.0;
            }
            break;
        }
        // walk towards mu until the first weight hits zero
        let mut theta = 1.0_f64;
        let mut blocking = support[0];
        for (k, &j) in support.iter().enumerate() {
            if mu[k] <= 0.0 {
                let t = lambda[j] / (lambda[j] - mu[k]);
                if t < theta {
                    theta = t;
                    blocking = j;
                }
            }
        }
        for (k, &j) in support.iter().enumerate() {
            lambda[j] += theta * (mu[k] - lambda[j]);
        }
        lambda[blocking] = 0.0;
        project_simplex_roundoff(lambda);
    }
    if objective(gram, lambda) > start {
        lambda.copy_from(&saved);
    }
}

/// Solves `min 0.5 mu^T G_SS mu` subject to `sum(mu) = 1` through the bordered
/// KKT system, using an SVD so that affinely dependent supports still work.
fn affine_minimizer(gram: &DMatrix<f64>, support: &[usize]) -> Option<DVector<f64>> {
    let s = support.len();
    if s == 0 {
        return None;
    }
    if s == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let mut kkt = DMatrix::zeros(s + 1, s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate() {
            kkt[(a, b)] = gram[(i, j)];
        }
        kkt[(a, s)] = 1.0;
        kkt[(s, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(s + 1);
    rhs[s] = 1.0;
    let eps = 1e-13 * kkt.amax().max(1.0);
    let sol = kkt.svd(true, true).solve(&rhs, eps).ok()?;
    let mu = sol.rows(0, s).into_owned();
    let total = mu.sum();
    if !total.is_finite() || (total - 1.0).abs() > 1e-8 {
        return None;
    }
    Some(mu / total)
}

/// Exact minimum-norm point of the segment between two rows.
pub fn exact_qp_two_rows(m: &DMatrix<f64>) -> Result<DirectionResult> {
    if m.nrows() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, actual: m.nrows() });
    }
    if m.iter().any(|v| v.is_nan()) {
        return Err(Error::NanInSubproblem);
    }
    let a = m.row(0).transpose();
    let b = m.row(1).transpose();
    let diff = &a - &b;
    let den = diff.norm_squared();
    let t = if den == 0.0 { 0.5 } else { (-b.dot(&diff) / den).clamp(0.0, 1.0) };
    let lambda = DVector::from_vec(vec![t, 1.0 - t]);
    Ok(DirectionResult::from_lambda(m, lambda, 0, f64::INFINITY))
}

/// Dispatches on the number of rows: trivial for one row, closed form for two
/// (when enabled), Frank-Wolfe otherwise.
pub fn solve_min_norm(m: &DMatrix<f64>, settings: &QpSettings) -> Result<DirectionResult> {
    if m.iter().any(|v| v.is_nan()) {
        return Err(Error::NanInSubproblem);
    }
    match m.nrows() {
        1 => Ok(DirectionResult::from_lambda(m, DVector::from_element(1, 1.0), 0, f64::INFINITY)),
        2 if settings.exact_two_rows => exact_qp_two_rows(m),
        _ => frank_wolfe(m, settings),
    }
}

/// How the rows `A_i JF(x)` are rescaled before the hull is formed.
#[derive(Debug, Clone, PartialEq)]
pub enum DirectionStrategy {
    Steepest,
    /// Row `i` divided by `alpha_i`.
    BarzilaiBorwein(DVector<f64>),
    /// Every row normalised to unit length.
    Equiangular,
    /// Row `i` divided by a fixed `s_i`.
    FixedScale(DVector<f64>),
}

impl DirectionStrategy {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Steepest => "steepest",
            Self::BarzilaiBorwein(_) => "bb",
            Self::Equiangular => "equiangular",
            Self::FixedScale(_) => "fixed-scale",
        }
    }
}

/// Builds the subproblem matrix for `strategy`. Divisors are applied to `A`
/// before the product with the Jacobian, so a BB direction is bitwise the
/// steepest direction of the pre-scaled cone.
pub fn subproblem_matrix(jac: &DMatrix<f64>, cone: &PolyhedralCone, strategy: &DirectionStrategy) -> Result<DMatrix<f64>> {
    if jac.nrows() != cone.dim() {
        return Err(Error::DimensionMismatch { expected: cone.dim(), actual: jac.nrows() });
    }
    let m = match strategy {
        DirectionStrategy::Steepest | DirectionStrategy::Equiangular => cone.matrix() * jac,
        DirectionStrategy::BarzilaiBorwein(s) | DirectionStrategy::FixedScale(s) => {
            cone.divide_rows(s.as_slice())?.matrix() * jac
        }
    };
    if m.iter().any(|v| v.is_nan()) {
        return Err(Error::NanInSubproblem);
    }
    Ok(m)
}

/// Direction at a point with a precomputed Jacobian.
pub fn direction_from_jacobian(
    jac: &DMatrix<f64>,
    cone: &PolyhedralCone,
    strategy: &DirectionStrategy,
    settings: &QpSettings,
) -> Result<DirectionResult> {
    let m = subproblem_matrix(jac, cone, strategy)?;
    if *strategy != DirectionStrategy::Equiangular {
        return solve_min_norm(&m, settings);
    }
    let l = m.nrows();
    let kept: Vec<usize> = (0..l).filter(|&i| m.row(i).norm() > ZERO_ROW_NORM).collect();
    if kept.is_empty() {
        // every transformed gradient vanishes: stationary
        let lambda = DVector::from_element(l, 1.0 / l as f64);
        let n = m.ncols();
        return Ok(DirectionResult {
            d: DVector::zeros(n),
            lambda,
            dnorm: 0.0,
            theta: 0.0,
            fw_gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let unit = DMatrix::from_fn(kept.len(), m.ncols(), |r, c| {
        let i = kept[r];
        m[(i, c)] / m.row(i).norm()
    });
    let mut res = solve_min_norm(&unit, settings)?;
    let mut lambda = DVector::zeros(l);
    for (r, &i) in kept.iter().enumerate() {
        lambda[i] = res.lambda[r];
    }
    res.lambda = lambda;
    Ok(res)
}

/// Direction at `x` for `problem` ordered by `cone`.
pub fn direction(
    x: &DVector<f64>,
    problem: &VectorProblem,
    cone: &PolyhedralCone,
    strategy: &DirectionStrategy,
    settings: &QpSettings,
) -> Result<DirectionResult> {
    let jac = problem.jacobian(x)?;
    direction_from_jacobian(&jac, cone, strategy, settings)
}

/// `|d| <= tol`, inclusive.
pub fn is_stationary(res: &DirectionResult, tol: f64) -> bool {
    res.dnorm <= tol
}
