//! Checks that connect runs to the convergence theory: the condition number of
//! a problem under a cone, per-step contraction factors, a grid lower bound on
//! the merit function `u0`, and sampled majorization tests.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::VectorProblem;
use crate::solver::SolveTrace;

/// Multiplicative slack of the per-step rate test.
pub const RATE_SLACK: f64 = 1e-6;

/// `max_i <A_i, ell> / <A_i, mu>`; the maximum of a linear-fractional function
/// over `conv{A_i}` is attained at a vertex.
pub fn condition_number(mu: &DVector<f64>, ell: &DVector<f64>, cone: &PolyhedralCone) -> Result<f64> {
    let m = cone.dim();
    for v in [mu, ell] {
        if v.len() != m {
            return Err(Error::DimensionMismatch { expected: m, actual: v.len() });
        }
    }
    let num = cone.matrix() * ell;
    let den = cone.matrix() * mu;
    let mut kappa = f64::NEG_INFINITY;
    for (n, d) in num.iter().zip(den.iter()) {
        if !(*d > 0.0) {
            return Err(Error::config("mu must pair positively with every row of the cone"));
        }
        kappa = kappa.max(n / d);
    }
    Ok(kappa)
}

/// `max_i <A_i, ell>`.
pub fn l_max(ell: &DVector<f64>, cone: &PolyhedralCone) -> f64 {
    (cone.matrix() * ell).max()
}

/// `min_i <A_i, mu>`.
pub fn mu_min(mu: &DVector<f64>, cone: &PolyhedralCone) -> f64 {
    (cone.matrix() * mu).min()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateViolation {
    pub k: usize,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// `(k, |x_{k+1} - x*| / |x_k - x*|)` for every counted step.
    pub ratios: Vec<(usize, f64)>,
    pub bound: f64,
    pub violations: Vec<RateViolation>,
    pub pass: bool,
}

impl RateReport {
    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Per-step contraction towards `xstar`. Steps starting within
/// `10 eps |x*|` of `xstar` are skipped.
pub fn verify_linear_rate(trace: &SolveTrace, xstar: &DVector<f64>, rate: f64) -> RateReport {
    let xs = trace.iterates();
    let floor = 10.0 * f64::EPSILON * xstar.norm();
    let mut ratios = Vec::new();
    let mut violations = Vec::new();
    for (k, pair) in xs.windows(2).enumerate() {
        let before = (&pair[0] - xstar).norm();
        if before <= floor || before == 0.0 {
            continue;
        }
        let ratio = (&pair[1] - xstar).norm() / before;
        ratios.push((k, ratio));
        if ratio > rate * (1.0 + RATE_SLACK) {
            violations.push(RateViolation { k, ratio, bound: rate });
        }
    }
    RateReport { pass: violations.is_empty(), ratios, bound: rate, violations }
}

/// Sample points with cached objective values.
#[derive(Debug, Clone)]
pub struct Grid {
    pub points: Vec<DVector<f64>>,
}

impl Grid {
    /// Tensor grid with `per_axis` points per coordinate over the problem box.
    pub fn uniform(problem: &VectorProblem, per_axis: usize) -> Result<Self> {
        let n = problem.n();
        if per_axis < 2 {
            return Err(Error::EmptyGrid);
        }
        let total = per_axis.checked_pow(n as u32).filter(|&t| t <= 10_000_000).ok_or_else(|| {
            Error::Unsupported(format!("a {per_axis}^{n} grid is too large"))
        })?;
        let (lo, hi) = (problem.lower(), problem.upper());
        let points = (0..total)
            .map(|mut idx| {
                DVector::from_fn(n, |i, _| {
                    let j = idx % per_axis;
                    idx /= per_axis;
                    lo[i] + (hi[i] - lo[i]) * j as f64 / (per_axis - 1) as f64
                })
            })
            .collect();
        Ok(Self { points })
    }

    pub fn from_points(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { points })
    }

    /// Objective values at every grid point; points outside the domain are dropped.
    pub fn evaluate(&self, problem: &VectorProblem) -> GridValues {
        let entries = self
            .points
            .par_iter()
            .filter_map(|z| problem.evaluate(z).ok().map(|f| (z.clone(), f)))
            .collect();
        GridValues { entries }
    }
}

#[derive(Debug, Clone)]
pub struct GridValues {
    pub entries: Vec<(DVector<f64>, DVector<f64>)>,
}

impl GridValues {
    /// `max_z min_i <A_i, F(x) - F(z)>` over the grid, given `fx = F(x)`.
    pub fn u0_lower_bound(&self, fx: &DVector<f64>, cone: &PolyhedralCone) -> Result<f64> {
        if self.entries.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let a = cone.matrix();
        Ok(self
            .entries
            .par_iter()
            .map(|(_, fz)| (a * (fx - fz)).min())
            .reduce(|| f64::NEG_INFINITY, f64::max))
    }

    /// Largest pairwise distance among grid points `z` with `F(z) <=_K F(x0)`,
    /// together with `x0` itself.
    pub fn level_set_diameter(&self, x0: &DVector<f64>, fx0: &DVector<f64>, cone: &PolyhedralCone) -> Result<f64> {
        let mut members = vec![x0.clone()];
        for (z, fz) in &self.entries {
            if cone.leq(fz, fx0)? {
                members.push(z.clone());
            }
        }
        let diam = members
            .par_iter()
            .enumerate()
            .map(|(i, a)| members[i + 1..].iter().map(|b| (a - b).norm()).fold(0.0, f64::max))
            .reduce(|| 0.0, f64::max);
        Ok(diam)
    }
}

/// Grid lower bound of the merit function at `x`.
pub fn u0_grid_estimate(x: &DVector<f64>, problem: &VectorProblem, cone: &PolyhedralCone, grid: &Grid) -> Result<f64> {
    if grid.points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let fx = problem.evaluate(x)?;
    grid.evaluate(problem).u0_lower_bound(&fx, cone)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritCheck {
    pub k: usize,
    pub u0: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeritReport {
    pub l_max: f64,
    pub diameter: f64,
    pub slack: f64,
    pub checks: Vec<MeritCheck>,
    pub pass: bool,
}

/// Checks `u0(x_k) <= l_max R^2 / (2k) * slack` for `k >= 1` along a trace,
/// with `R` the sampled diameter of the level set of `F(x_0)`.
pub fn merit_envelope(
    trace: &SolveTrace,
    values: &GridValues,
    cone: &PolyhedralCone,
    l_max: f64,
    slack: f64,
) -> Result<MeritReport> {
    let xs = trace.iterates();
    let fs = trace.values();
    let diameter = values.level_set_diameter(&xs[0], &fs[0], cone)?;
    let mut checks = Vec::new();
    for (k, fk) in fs.iter().enumerate().skip(1) {
        let u0 = values.u0_lower_bound(fk, cone)?;
        let bound = l_max * diameter * diameter / (2.0 * k as f64) * slack;
        checks.push(MeritCheck { k, u0, bound });
    }
    let pass = checks.iter().all(|c| c.u0 <= c.bound);
    Ok(MeritReport { l_max, diameter, slack, checks, pass })
}

/// Largest violation of
/// `A (F(x) - F(xk)) <= A JF(xk) (x - xk) + 0.5 |x - xk|^2 scale`
/// over `samples` seeded box points, relative to the magnitude of the terms.
pub fn majorization_violation(
    problem: &VectorProblem,
    cone: &PolyhedralCone,
    xk: &DVector<f64>,
    scale: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if scale.len() != cone.rows() {
        return Err(Error::DimensionMismatch { expected: cone.rows(), actual: scale.len() });
    }
    let a = cone.matrix();
    let fk = problem.evaluate(xk)?;
    let aj = a * problem.jacobian(xk)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let x = problem.sample_point(&mut rng);
        let step = &x - xk;
        let lhs = a * (problem.evaluate(&x)? - &fk);
        let lin = &aj * &step;
        let quad = scale * (0.5 * step.norm_squared());
        for i in 0..lhs.len() {
            let mag = lhs[i].abs() + lin[i].abs() + quad[i].abs() + 1.0;
            worst = worst.max((lhs[i] - lin[i] - quad[i]) / mag);
        }
    }
    Ok(worst)
}

/// Rounding allowance of [`surrogate_majorization_check`], relative to the
/// size of the compared terms.
pub const MAJORIZATION_TOL: f64 = 1e-12;

/// True when the quadratic model with per-row curvature `scale` majorizes
/// `F - F(xk)` at every sampled point.
pub fn surrogate_majorization_check(
    problem: &VectorProblem,
    cone: &PolyhedralCone,
    xk: &DVector<f64>,
    scale: &DVector<f64>,
    samples: usize,
) -> Result<bool> {
    Ok(majorization_violation(problem, cone, xk, scale, samples, 0x5eed)? <= MAJORIZATION_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;
    use crate::solver::{run, Algorithm, LineSearchKind, SolverConfig};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    /// Dense sampling of the segment between the two rows.
    fn kappa_by_sampling(mu: &DVector<f64>, ell: &DVector<f64>, cone: &PolyhedralCone) -> f64 {
        let (a, b) = (cone.row(0), cone.row(1));
        (0..=10_000)
            .map(|i| {
                let t = i as f64 / 10_000.0;
                let c = &a * t + &b * (1.0 - t);
                c.dot(ell) / c.dot(mu)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn condition_number_examples() {
        let r2 = PolyhedralCone::orthant(2);
        assert_eq!(condition_number(&v(&[1.0, 3.0]), &v(&[1.0, 3.0]), &r2).unwrap(), 1.0);
        let (mu, ell) = (v(&[1.0, 2.0]), v(&[4.0, 2.0]));
        assert_eq!(condition_number(&mu, &ell, &r2).unwrap(), 4.0);
        assert!((kappa_by_sampling(&mu, &ell, &r2) - 4.0).abs() < 1e-12);
        let k1 = PolyhedralCone::k1();
        let (mu, ell) = (v(&[1.0, 1.0]), v(&[2.0, 2.0]));
        assert_eq!(condition_number(&mu, &ell, &k1).unwrap(), 2.0);
        assert!((kappa_by_sampling(&mu, &ell, &k1) - 2.0).abs() < 1e-12);
        assert!(condition_number(&v(&[1.0, -1.0]), &ell, &r2).is_err());
    }

    #[test]
    fn one_step_trace_passes_rate_check() {
        let p = problems::bk1();
        let cfg = SolverConfig::new(Algorithm::MmEllBase, PolyhedralCone::orthant(2));
        let t = run(&cfg, &p, &p.sample_start(4)).unwrap();
        assert_eq!(t.iterations, 1);
        let xstar = DVector::from_column_slice(&t.x_final);
        assert!(verify_linear_rate(&t, &xstar, 1e-3).pass);
    }

    #[test]
    fn rate_check_negative_control() {
        let h1 = nalgebra::DMatrix::from_diagonal(&v(&[1.0, 4.0]));
        let h2 = nalgebra::DMatrix::identity(2, 2) * 2.0;
        let p = problems::quadratic("q", vec![h1, h2], vec![v(&[0.0, 0.0]), v(&[1.0, -1.0])], v(&[-3.0, -3.0]), v(&[3.0, 3.0])).unwrap();
        let mut cfg = SolverConfig::new(Algorithm::MmFixedL, PolyhedralCone::orthant(2));
        cfg.fixed_l = Some(8.0);
        let t = run(&cfg, &p, &p.sample_start(2)).unwrap();
        let xstar = DVector::from_column_slice(&t.x_final);
        let honest = verify_linear_rate(&t, &xstar, (1.0 - 1.0 / 8.0f64).sqrt());
        assert!(honest.pass);
        let strict = verify_linear_rate(&t, &xstar, 0.5 * honest.max_ratio());
        assert!(!strict.pass);
    }

    #[test]
    fn u0_single_objective_is_value_minus_grid_min() {
        let p = problems::linear("lin", nalgebra::DMatrix::from_row_slice(1, 2, &[1.0, 2.0]), v(&[0.0]), v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap();
        let cone = PolyhedralCone::from_rows("R1+", &[vec![1.0]]).unwrap();
        let grid = Grid::uniform(&p, 11).unwrap();
        let u0 = u0_grid_estimate(&v(&[0.5, 0.5]), &p, &cone, &grid).unwrap();
        assert!((u0 - 1.5).abs() < 1e-12);
    }

    #[test]
    fn u0_nonpositive_at_efficient_point() {
        let p = problems::bk1();
        let grid = Grid::uniform(&p, 41).unwrap();
        let u0 = u0_grid_estimate(&v(&[2.0, 2.0]), &p, &PolyhedralCone::orthant(2), &grid).unwrap();
        assert!(u0 <= 0.0);
        assert!(matches!(Grid::from_points(vec![]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn u0_positive_and_grid_stable_on_bk1() {
        let p = problems::bk1();
        let cone = PolyhedralCone::orthant(2);
        let x = v(&[10.0, 10.0]);
        let coarse = u0_grid_estimate(&x, &p, &cone, &Grid::uniform(&p, 101).unwrap()).unwrap();
        let fine = u0_grid_estimate(&x, &p, &cone, &Grid::uniform(&p, 201).unwrap()).unwrap();
        assert!(coarse > 0.0);
        assert!((coarse - fine).abs() <= 0.05 * fine);
        let mut cfg = SolverConfig::new(Algorithm::Sdvo, cone.clone());
        cfg.line_search = LineSearchKind::Mm;
        let t = run(&cfg, &p, &crate::problems::StartPair { x0: x.clone(), x_prev: x.clone() }).unwrap();
        let values = Grid::uniform(&p, 101).unwrap().evaluate(&p);
        let u: Vec<f64> = t.values().iter().map(|f| values.u0_lower_bound(f, &cone).unwrap()).collect();
        assert!(u.windows(2).all(|w| w[1] <= w[0] * 1.05 + 1e-12));
    }

    #[test]
    fn majorization_checks() {
        let p = problems::bk1();
        let cone = PolyhedralCone::orthant(2);
        let xk = v(&[1.0, 7.0]);
        assert!(surrogate_majorization_check(&p, &cone, &xk, &v(&[2.0, 2.0]), 200).unwrap());
        assert!(majorization_violation(&p, &cone, &xk, &v(&[2.0, 2.0]), 200, 1).unwrap().abs() < 1e-12);
        assert!(surrogate_majorization_check(&p, &cone, &xk, &v(&[5.0, 5.0]), 200).unwrap());
        assert!(!surrogate_majorization_check(&p, &cone, &xk, &v(&[0.0, 0.0]), 200).unwrap());
    }
}
