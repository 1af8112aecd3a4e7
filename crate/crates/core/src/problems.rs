//! Benchmark objectives `F: R^n -> R^m` with analytic Jacobians, sampling boxes
//! and optional curvature certificates.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};

pub type EvalFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type JacFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Radius of the `x_prev` perturbation relative to the box width.
pub const PREV_RADIUS: f64 = 1e-4;

/// Names of the registered benchmark problems, in table order.
pub const PROBLEM_NAMES: [&str; 10] =
    ["BK1", "DD1", "Deb", "FF1", "Hil1", "Imbalance1", "JOS1a", "LE1", "PNR", "WIT1"];

/// Strong-convexity (`mu`) and smoothness (`ell`) vectors in objective space.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificates {
    pub mu: DVector<f64>,
    pub ell: DVector<f64>,
    /// Every component has a Hessian that is a multiple of the identity, so the
    /// second-order remainder equals `0.5 |y-x|^2 mu` exactly and the vectors
    /// are valid under any ordering cone. Otherwise they hold for the orthant.
    pub exact: bool,
}

#[derive(Clone)]
pub struct VectorProblem {
    name: String,
    n: usize,
    m: usize,
    lower: DVector<f64>,
    upper: DVector<f64>,
    eval: EvalFn,
    jac: JacFn,
    certificates: Option<Certificates>,
}

impl fmt::Debug for VectorProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("lower", &self.lower.as_slice())
            .field("upper", &self.upper.as_slice())
            .field("certificates", &self.certificates)
            .finish_non_exhaustive()
    }
}

/// Starting point and the auxiliary previous point used by the first BB step.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPair {
    pub x0: DVector<f64>,
    pub x_prev: DVector<f64>,
}

impl VectorProblem {
    pub fn new(
        name: impl Into<String>,
        m: usize,
        lower: DVector<f64>,
        upper: DVector<f64>,
        eval: EvalFn,
        jac: JacFn,
    ) -> Result<Self> {
        let n = lower.len();
        if upper.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: upper.len() });
        }
        if n == 0 || m == 0 {
            return Err(Error::config("problem dimensions must be positive"));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(Error::config("lower bounds must be strictly below upper bounds"));
        }
        Ok(Self { name: name.into(), n, m, lower, upper, eval, jac, certificates: None })
    }

    pub fn with_certificates(mut self, mu: DVector<f64>, ell: DVector<f64>, exact: bool) -> Result<Self> {
        for v in [&mu, &ell] {
            if v.len() != self.m {
                return Err(Error::DimensionMismatch { expected: self.m, actual: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("certificates must be finite"));
            }
        }
        self.certificates = Some(Certificates { mu, ell, exact });
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn certificates(&self) -> Option<&Certificates> {
        self.certificates.as_ref()
    }

    /// Certificates valid under `cone`, if any.
    pub fn certificates_for(&self, cone: &PolyhedralCone) -> Option<&Certificates> {
        self.certificates.as_ref().filter(|c| c.exact || cone.is_orthant())
    }

    /// `F(x)`, rejecting non-finite input or output.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let fx = (self.eval)(x);
        debug_assert_eq!(fx.len(), self.m);
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "objective value", x: x.as_slice().to_vec() });
        }
        Ok(fx)
    }

    /// Analytic `JF(x)`, an `m x n` matrix.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let j = (self.jac)(x);
        debug_assert_eq!(j.shape(), (self.m, self.n));
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "Jacobian", x: x.as_slice().to_vec() });
        }
        Ok(j)
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, actual: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "input", x: x.as_slice().to_vec() });
        }
        Ok(())
    }

    /// Uniform point in the box from a seeded generator.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| rng.random_range(self.lower[i]..self.upper[i]))
    }

    /// Seeded start: `x0` uniform in the box and `x_prev = x0 + delta` with
    /// `delta_i` uniform in `[-1e-4, 1e-4]` times the box width.
    pub fn sample_start(&self, seed: u64) -> StartPair {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = self.sample_point(&mut rng);
        let x_prev = DVector::from_fn(self.n, |i, _| {
            let width = self.upper[i] - self.lower[i];
            x0[i] + rng.random_range(-PREV_RADIUS..=PREV_RADIUS) * width
        });
        StartPair { x0, x_prev }
    }

    /// Largest relative error between the analytic Jacobian and central
    /// differences with step `h`, over `samples` seeded points of the box.
    /// Each entry is compared as `|a - fd| / max(1, |a|)`.
    pub fn fd_check(&self, samples: usize, h: f64, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let x = self.sample_point(&mut rng);
            let analytic = self.jacobian(&x)?;
            let numeric = self.central_differences(&x, h)?;
            for (a, f) in analytic.iter().zip(numeric.iter()) {
                worst = worst.max((a - f).abs() / a.abs().max(1.0));
            }
        }
        Ok(worst)
    }

    pub fn central_differences(&self, x: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(self.m, self.n);
        for j in 0..self.n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let col = (self.evaluate(&xp)? - self.evaluate(&xm)?) / (2.0 * h);
            out.set_column(j, &col);
        }
        Ok(out)
    }

    /// Copy of this problem whose Jacobian is replaced by `jac`; used for
    /// negative controls of the derivative gate.
    pub fn with_jacobian(&self, jac: JacFn) -> Self {
        Self { jac, ..self.clone() }
    }
}

/// Evaluation counters for a single run.
#[derive(Debug)]
pub struct Evaluator<'a> {
    problem: &'a VectorProblem,
    pub fevals: usize,
    pub jevals: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a VectorProblem) -> Self {
        Self { problem, fevals: 0, jevals: 0 }
    }

    pub fn problem(&self) -> &'a VectorProblem {
        self.problem
    }

    pub fn eval(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.fevals += 1;
        self.problem.evaluate(x)
    }

    pub fn jac(&mut self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.jevals += 1;
        self.problem.jacobian(x)
    }
}

/// Deterministic per-index seed stream (splitmix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn boxed(n: usize, lo: f64, hi: f64) -> (DVector<f64>, DVector<f64>) {
    (DVector::from_element(n, lo), DVector::from_element(n, hi))
}

fn pair(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn rows2(r1: &[f64], r2: &[f64]) -> DMatrix<f64> {
    let n = r1.len();
    DMatrix::from_fn(2, n, |i, j| if i == 0 { r1[j] } else { r2[j] })
}

/// All registered problems in table order.
pub fn registry() -> Vec<VectorProblem> {
    PROBLEM_NAMES.iter().map(|n| problem_by_name(n).expect("registered")).collect()
}

/// Looks up a registered problem, ignoring ASCII case.
pub fn problem_by_name(name: &str) -> Result<VectorProblem> {
    let key = name.to_ascii_lowercase();
    let p = match key.as_str() {
        "bk1" => bk1(),
        "dd1" => dd1(),
        "deb" => deb(),
        "ff1" => ff1(),
        "hil1" => hil1(),
        "imbalance1" => imbalance1(),
        "jos1a" => jos1a(),
        "le1" => le1(),
        "pnr" => pnr(),
        "wit1" => wit1(),
        _ => return Err(Error::Unknown { kind: "problem", name: name.to_string() }),
    };
    Ok(p)
}

/// `(|x|^2, |x - (5,5)|^2)` on `[-5,10]^2`.
pub fn bk1() -> VectorProblem {
    let (lo, hi) = boxed(2, -5.0, 10.0);
    VectorProblem::new(
        "BK1",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let (a, b) = (x[0], x[1]);
            pair(a * a + b * b, (a - 5.0).powi(2) + (b - 5.0).powi(2))
        }),
        Arc::new(|x| rows2(&[2.0 * x[0], 2.0 * x[1]], &[2.0 * (x[0] - 5.0), 2.0 * (x[1] - 5.0)])),
    )
    .and_then(|p| p.with_certificates(pair(2.0, 2.0), pair(2.0, 2.0), true))
    .expect("BK1 is well formed")
}

/// `(|x|^2, 3x1 + 2x2 - x3/3 + 0.01 (x4 - x5)^3)` on `[-20,20]^5`.
pub fn dd1() -> VectorProblem {
    let (lo, hi) = boxed(5, -20.0, 20.0);
    VectorProblem::new(
        "DD1",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let f1 = x.norm_squared();
            let f2 = 3.0 * x[0] + 2.0 * x[1] - x[2] / 3.0 + 0.01 * (x[3] - x[4]).powi(3);
            pair(f1, f2)
        }),
        Arc::new(|x| {
            let c = 0.03 * (x[3] - x[4]).powi(2);
            let r1: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            rows2(&r1, &[3.0, 2.0, -1.0 / 3.0, c, -c])
        }),
    )
    .expect("DD1 is well formed")
}

fn deb_g(x2: f64) -> (f64, f64) {
    let u = (x2 - 0.2) / 0.004;
    let v = (x2 - 0.6) / 0.4;
    let eu = (-u * u).exp();
    let ev = (-v * v).exp();
    let g = 2.0 - eu - 0.8 * ev;
    let dg = eu * 2.0 * u / 0.004 + 0.8 * ev * 2.0 * v / 0.4;
    (g, dg)
}

/// Deb's bimodal problem `(x1, g(x2)/x1)` on `[0.1,1]^2`.
pub fn deb() -> VectorProblem {
    let (lo, hi) = boxed(2, 0.1, 1.0);
    VectorProblem::new(
        "Deb",
        2,
        lo,
        hi,
        Arc::new(|x| pair(x[0], deb_g(x[1]).0 / x[0])),
        Arc::new(|x| {
            let (g, dg) = deb_g(x[1]);
            rows2(&[1.0, 0.0], &[-g / (x[0] * x[0]), dg / x[0]])
        }),
    )
    .expect("Deb is well formed")
}

/// `(1 - exp(-|x - c|^2), 1 - exp(-|x + c|^2))` with `c = (1,1)/sqrt(2)` on `[-1,1]^2`.
pub fn ff1() -> VectorProblem {
    let c = 1.0 / 2f64.sqrt();
    let (lo, hi) = boxed(2, -1.0, 1.0);
    VectorProblem::new(
        "FF1",
        2,
        lo,
        hi,
        Arc::new(move |x| {
            let a = (x[0] - c).powi(2) + (x[1] - c).powi(2);
            let b = (x[0] + c).powi(2) + (x[1] + c).powi(2);
            pair(1.0 - (-a).exp(), 1.0 - (-b).exp())
        }),
        Arc::new(move |x| {
            let ea = (-((x[0] - c).powi(2) + (x[1] - c).powi(2))).exp();
            let eb = (-((x[0] + c).powi(2) + (x[1] + c).powi(2))).exp();
            rows2(
                &[2.0 * (x[0] - c) * ea, 2.0 * (x[1] - c) * ea],
                &[2.0 * (x[0] + c) * eb, 2.0 * (x[1] + c) * eb],
            )
        }),
    )
    .expect("FF1 is well formed")
}

/// Hillermeier's problem on `[0,1]^2`: a point on a distorted circle arc.
pub fn hil1() -> VectorProblem {
    const DEG: f64 = 2.0 * PI / 360.0;
    let (lo, hi) = boxed(2, 0.0, 1.0);
    let parts = |x: &DVector<f64>| {
        let (s1, c1) = (2.0 * PI * x[0]).sin_cos();
        let (s2, c2) = (2.0 * PI * x[1]).sin_cos();
        let a = DEG * (45.0 + 40.0 * s1 + 25.0 * s2);
        let b = 1.0 + 0.5 * c1;
        let da = [DEG * 40.0 * 2.0 * PI * c1, DEG * 25.0 * 2.0 * PI * c2];
        let db = [-0.5 * 2.0 * PI * s1, 0.0];
        (a, b, da, db)
    };
    VectorProblem::new(
        "Hil1",
        2,
        lo,
        hi,
        Arc::new(move |x| {
            let (a, b, _, _) = parts(x);
            pair(a.cos() * b, a.sin() * b)
        }),
        Arc::new(move |x| {
            let (a, b, da, db) = parts(x);
            let (sa, ca) = a.sin_cos();
            rows2(
                &[-sa * da[0] * b + ca * db[0], -sa * da[1] * b + ca * db[1]],
                &[ca * da[0] * b + sa * db[0], ca * da[1] * b + sa * db[1]],
            )
        }),
    )
    .expect("Hil1 is well formed")
}

/// Badly scaled pair `(|x|^2 / 2, 100 sqrt(1 + |x - (1,1)|^2))` on `[-2,2]^2`.
pub fn imbalance1() -> VectorProblem {
    let (lo, hi) = boxed(2, -2.0, 2.0);
    VectorProblem::new(
        "Imbalance1",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let r = ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) + 1.0).sqrt();
            pair(0.5 * x.norm_squared(), 100.0 * r)
        }),
        Arc::new(|x| {
            let r = ((x[0] - 1.0).powi(2) + (x[1] - 1.0).powi(2) + 1.0).sqrt();
            rows2(&[x[0], x[1]], &[100.0 * (x[0] - 1.0) / r, 100.0 * (x[1] - 1.0) / r])
        }),
    )
    .expect("Imbalance1 is well formed")
}

/// `((1/n) |x|^2, (1/n) |x - 2|^2)` with `n = 50` on `[-2,2]^50`.
pub fn jos1a() -> VectorProblem {
    const N: usize = 50;
    let inv = 1.0 / N as f64;
    let (lo, hi) = boxed(N, -2.0, 2.0);
    VectorProblem::new(
        "JOS1a",
        2,
        lo,
        hi,
        Arc::new(move |x| {
            let f1: f64 = x.iter().map(|v| v * v).sum();
            let f2: f64 = x.iter().map(|v| (v - 2.0) * (v - 2.0)).sum();
            pair(f1 * inv, f2 * inv)
        }),
        Arc::new(move |x| DMatrix::from_fn(2, N, |i, j| 2.0 * inv * if i == 0 { x[j] } else { x[j] - 2.0 })),
    )
    .and_then(|p| p.with_certificates(pair(2.0 * inv, 2.0 * inv), pair(2.0 * inv, 2.0 * inv), true))
    .expect("JOS1a is well formed")
}

/// `(|x|^(1/4), |x - (0.5,0.5)|^(1/2))` on `[-5,10]^2`.
pub fn le1() -> VectorProblem {
    let (lo, hi) = boxed(2, -5.0, 10.0);
    VectorProblem::new(
        "LE1",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let r1 = x[0] * x[0] + x[1] * x[1];
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            pair(r1.powf(0.125), r2.powf(0.25))
        }),
        Arc::new(|x| {
            let r1 = x[0] * x[0] + x[1] * x[1];
            let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
            let c1 = 0.25 * r1.powf(-0.875);
            let c2 = 0.5 * r2.powf(-0.75);
            rows2(&[c1 * x[0], c1 * x[1]], &[c2 * (x[0] - 0.5), c2 * (x[1] - 0.5)])
        }),
    )
    .expect("LE1 is well formed")
}

/// Preuss-Naujoks-Rudolph problem on `[-2,2]^2`.
pub fn pnr() -> VectorProblem {
    let (lo, hi) = boxed(2, -2.0, 2.0);
    VectorProblem::new(
        "PNR",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let (a, b) = (x[0], x[1]);
            let f1 = a.powi(4) + b.powi(4) - a * a + b * b - 10.0 * a * b + 0.25 * a + 20.0;
            pair(f1, (a - 1.0).powi(2) + b * b)
        }),
        Arc::new(|x| {
            let (a, b) = (x[0], x[1]);
            rows2(
                &[4.0 * a.powi(3) - 2.0 * a - 10.0 * b + 0.25, 4.0 * b.powi(3) + 2.0 * b - 10.0 * a],
                &[2.0 * (a - 1.0), 2.0 * b],
            )
        }),
    )
    .expect("PNR is well formed")
}

/// Witting's convex two-objective problem with its perturbation weight set to
/// zero: `b +/- (x1 - x2)/2` with
/// `b = (sqrt(1 + (x1+x2)^2) + sqrt(1 + (x1-x2)^2)) / 2`, on `[-2,2]^2`.
pub fn wit1() -> VectorProblem {
    let (lo, hi) = boxed(2, -2.0, 2.0);
    VectorProblem::new(
        "WIT1",
        2,
        lo,
        hi,
        Arc::new(|x| {
            let u = x[0] + x[1];
            let v = x[0] - x[1];
            let b = 0.5 * ((1.0 + u * u).sqrt() + (1.0 + v * v).sqrt());
            pair(b + 0.5 * v, b - 0.5 * v)
        }),
        Arc::new(|x| {
            let u = x[0] + x[1];
            let v = x[0] - x[1];
            let du = u / (1.0 + u * u).sqrt();
            let dv = v / (1.0 + v * v).sqrt();
            let gb = [0.5 * (du + dv), 0.5 * (du - dv)];
            rows2(&[gb[0] + 0.5, gb[1] - 0.5], &[gb[0] - 0.5, gb[1] + 0.5])
        }),
    )
    .expect("WIT1 is well formed")
}

/// `F_i(x) = 0.5 (x - c_i)^T H_i (x - c_i)` for symmetric positive definite `H_i`,
/// with `mu_i`, `ell_i` the extreme eigenvalues of `H_i`.
pub fn quadratic(
    name: impl Into<String>,
    hessians: Vec<DMatrix<f64>>,
    centers: Vec<DVector<f64>>,
    lower: DVector<f64>,
    upper: DVector<f64>,
) -> Result<VectorProblem> {
    let m = hessians.len();
    let n = lower.len();
    if centers.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: centers.len() });
    }
    let mut mu = DVector::zeros(m);
    let mut ell = DVector::zeros(m);
    let mut exact = true;
    for (i, (h, c)) in hessians.iter().zip(&centers).enumerate() {
        if h.shape() != (n, n) || c.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: c.len() });
        }
        if (h - h.transpose()).amax() > 0.0 {
            return Err(Error::config("Hessians must be symmetric"));
        }
        let eig = h.clone().symmetric_eigen().eigenvalues;
        mu[i] = eig.min();
        ell[i] = eig.max();
        if mu[i] <= 0.0 {
            return Err(Error::config("Hessians must be positive definite"));
        }
        exact &= (h - DMatrix::identity(n, n) * h[(0, 0)]).amax() == 0.0;
    }
    let (h1, c1) = (Arc::new(hessians), Arc::new(centers));
    let (h2, c2) = (h1.clone(), c1.clone());
    VectorProblem::new(
        name,
        m,
        lower,
        upper,
        Arc::new(move |x| {
            DVector::from_fn(h1.len(), |i, _| {
                let r = x - &c1[i];
                0.5 * r.dot(&(&h1[i] * &r))
            })
        }),
        Arc::new(move |x| {
            let mut j = DMatrix::zeros(h2.len(), x.len());
            for i in 0..h2.len() {
                let g = &h2[i] * (x - &c2[i]);
                j.set_row(i, &g.transpose());
            }
            j
        }),
    )?
    .with_certificates(mu, ell, exact)
}

/// `F(x) = C x + b`.
pub fn linear(name: impl Into<String>, c: DMatrix<f64>, b: DVector<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Result<VectorProblem> {
    let m = c.nrows();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, actual: b.len() });
    }
    if c.ncols() != lower.len() {
        return Err(Error::DimensionMismatch { expected: lower.len(), actual: c.ncols() });
    }
    let c2 = c.clone();
    VectorProblem::new(name, m, lower, upper, Arc::new(move |x| &c * x + &b), Arc::new(move |_| c2.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn bk1_values() {
        let p = bk1();
        assert_eq!(p.evaluate(&v(&[0.0, 0.0])).unwrap(), v(&[0.0, 50.0]));
        let j = p.jacobian(&v(&[1.0, 1.0])).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, -8.0, -8.0]));
    }

    #[test]
    fn jos1a_values() {
        let p = jos1a();
        assert_eq!(p.evaluate(&DVector::from_element(50, 2.0)).unwrap(), v(&[4.0, 0.0]));
        let j = p.jacobian(&DVector::zeros(50)).unwrap();
        assert!(j.row(0).iter().all(|&x| x == 0.0));
        assert!(j.row(1).iter().all(|&x| (x + 4.0 / 50.0).abs() < 1e-15));
    }

    #[test]
    fn linear_jacobian_is_constant() {
        let c = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 1.0]);
        let p = linear("lin", c.clone(), v(&[1.0, 2.0]), DVector::from_element(3, -1.0), DVector::from_element(3, 1.0)).unwrap();
        assert_eq!(p.jacobian(&v(&[0.3, 0.1, -0.7])).unwrap(), c);
        assert_eq!(p.jacobian(&v(&[9.0, 9.0, 9.0])).unwrap(), c);
        // central differences are exact on affine maps up to rounding of order eps |F| / h
        assert!(p.fd_check(20, 1e-3, 1).unwrap() < 1e-10);
    }

    #[test]
    fn corrupted_jacobian_is_caught() {
        let p = bk1();
        let bad = p.with_jacobian(Arc::new(|x| {
            let mut j = rows2(&[2.0 * x[0], 2.0 * x[1]], &[2.0 * (x[0] - 5.0), 2.0 * (x[1] - 5.0)]);
            j[(0, 1)] += 1.0;
            j
        }));
        assert!(p.fd_check(20, 1e-6, 5).unwrap() < 1e-5);
        assert!(bad.fd_check(20, 1e-6, 5).unwrap() > 1e-1);
    }

    #[test]
    fn non_finite_output_is_an_error() {
        // LE1's gradient is singular at the origin
        let err = le1().jacobian(&v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFinite { what: "Jacobian", .. }));
        let err = deb().evaluate(&v(&[0.0, 0.5])).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn sample_start_is_deterministic_and_in_box() {
        let p = dd1();
        assert_eq!(p.sample_start(9), p.sample_start(9));
        assert_ne!(p.sample_start(9), p.sample_start(10));
        let width = (p.upper() - p.lower()).norm();
        for seed in 0..200 {
            let s = p.sample_start(seed);
            assert!(s.x0.iter().zip(p.lower().iter()).all(|(x, l)| x >= l));
            assert!(s.x0.iter().zip(p.upper().iter()).all(|(x, u)| x <= u));
            assert!((&s.x_prev - &s.x0).norm() <= 1e-3 * width);
        }
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(registry().len(), 10);
        assert_eq!(problem_by_name("imbalance1").unwrap().name(), "Imbalance1");
        assert!(matches!(problem_by_name("ZDT1"), Err(Error::Unknown { .. })));
    }

    #[test]
    fn quadratic_certificates() {
        let h1 = DMatrix::from_diagonal(&v(&[1.0, 4.0]));
        let h2 = DMatrix::identity(2, 2) * 2.0;
        let p = quadratic("q", vec![h1, h2], vec![v(&[0.0, 0.0]), v(&[1.0, 1.0])], v(&[-1.0, -1.0]), v(&[2.0, 2.0])).unwrap();
        let c = p.certificates().unwrap();
        assert_eq!(c.mu, v(&[1.0, 2.0]));
        assert_eq!(c.ell, v(&[4.0, 2.0]));
        assert!(!c.exact);
        assert!(p.certificates_for(&PolyhedralCone::k1()).is_none());
        assert!(p.certificates_for(&PolyhedralCone::orthant(2)).is_some());
        assert!(bk1().certificates_for(&PolyhedralCone::k2()).is_some());
    }

    #[test]
    fn seed_stream_is_spread() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|k| derive_seed(42, k)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
    }
}
