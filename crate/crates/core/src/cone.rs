//! Polyhedral ordering cones `K = {y : A y >= 0}` and the partial order they induce.
//!
//! The solver only ever touches the transform matrix `A` (H-representation).
//! An optional list of generators (V-representation) can be attached and
//! cross-checked against `A`, which is how the shipped cones are validated.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::VectorProblem;

/// Tolerance used only when comparing the H- and V-representations.
pub const GENERATOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralCone {
    name: String,
    matrix: DMatrix<f64>,
    generators: Option<Vec<DVector<f64>>>,
}

impl PolyhedralCone {
    /// Builds a cone from its transform matrix (`l x m`, one row per facet normal).
    pub fn new(name: impl Into<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let (l, m) = matrix.shape();
        if m == 0 || l == 0 {
            return Err(Error::InvalidCone("empty transform matrix".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCone("non-finite entry".into()));
        }
        if l < m {
            return Err(Error::InvalidCone(format!(
                "need at least as many rows as columns, got {l}x{m}"
            )));
        }
        for (i, row) in matrix.row_iter().enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidCone(format!("row {i} is zero")));
            }
        }
        let sv = matrix.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if smin <= 1e-12 * smax {
            return Err(Error::InvalidCone("transform matrix is column rank deficient".into()));
        }
        Ok(Self { name: name.into(), matrix, generators: None })
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, actual: bad.len() });
        }
        let matrix = DMatrix::from_fn(l, m, |i, j| rows[i][j]);
        Self::new(name, matrix)
    }

    /// The nonnegative orthant of `R^m` with `A = I`.
    pub fn orthant(m: usize) -> Self {
        let name = if m == 2 { "R2+".to_string() } else { format!("R{m}+") };
        let generators = (0..m).map(|i| DVector::from_fn(m, |j, _| f64::from(u8::from(i == j)))).collect();
        Self { name, matrix: DMatrix::identity(m, m), generators: Some(generators) }
    }

    /// `K1 = {5y1 - y2 >= 0, -y1 + 5y2 >= 0}`, a cone inside the orthant.
    pub fn k1() -> Self {
        let cone = Self::from_rows("K1", &[vec![5.0, -1.0], vec![-1.0, 5.0]]).expect("K1 is valid");
        cone.with_generators(vec![DVector::from_vec(vec![1.0, 5.0]), DVector::from_vec(vec![5.0, 1.0])])
            .expect("K1 generators are consistent")
    }

    /// `K2 = {5y1 + y2 >= 0, y1 + 5y2 >= 0}`, a cone containing the orthant.
    pub fn k2() -> Self {
        let cone = Self::from_rows("K2", &[vec![5.0, 1.0], vec![1.0, 5.0]]).expect("K2 is valid");
        cone.with_generators(vec![DVector::from_vec(vec![-1.0, 5.0]), DVector::from_vec(vec![5.0, -1.0])])
            .expect("K2 generators are consistent")
    }

    /// Looks up one of the named two-dimensional cones.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "R2+" | "r2+" | "orthant" => Ok(Self::orthant(2)),
            "K1" | "k1" => Ok(Self::k1()),
            "K2" | "k2" => Ok(Self::k2()),
            other => Err(Error::Unknown { kind: "cone", name: other.to_string() }),
        }
    }

    /// Attaches generators after checking `<A_i, g> >= -tol` for each of them.
    pub fn with_generators(mut self, generators: Vec<DVector<f64>>) -> Result<Self> {
        let m = self.dim();
        for g in &generators {
            if g.len() != m {
                return Err(Error::DimensionMismatch { expected: m, actual: g.len() });
            }
            let ag = &self.matrix * g;
            if let Some(i) = ag.iter().position(|&v| v < -GENERATOR_TOL) {
                return Err(Error::InvalidCone(format!(
                    "generator {:?} violates row {i}",
                    g.as_slice()
                )));
            }
        }
        self.generators = Some(generators);
        Ok(self)
    }

    /// Samples random points and checks that `A x >= 0` agrees with membership
    /// in the conic hull of the generators. Returns the number of samples checked.
    pub fn validate_generators(&self, samples: usize, seed: u64) -> Result<usize> {
        let Some(generators) = &self.generators else {
            return Ok(0);
        };
        let m = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
            let by_rows = (&self.matrix * &x).iter().all(|&v| v >= -GENERATOR_TOL);
            let by_gens = in_conic_hull(generators, &x, GENERATOR_TOL);
            if by_rows != by_gens {
                return Err(Error::InvalidCone(format!(
                    "H/V representations disagree at {:?}",
                    x.as_slice()
                )));
            }
        }
        Ok(samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn generators(&self) -> Option<&[DVector<f64>]> {
        self.generators.as_deref()
    }

    /// Number of rows `l`.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Objective-space dimension `m`.
    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.matrix.row(i).transpose()
    }

    /// `A v`.
    pub fn transform(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(v.len())?;
        Ok(&self.matrix * v)
    }

    /// `a <=_K b`, i.e. `A(b - a) >= 0` componentwise, with no tolerance.
    pub fn leq(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<bool> {
        self.check_dim(a.len())?;
        self.check_dim(b.len())?;
        Ok((&self.matrix * (b - a)).iter().all(|&v| v >= 0.0))
    }

    /// `a <_K b`, i.e. `b - a` lies in the interior of `K`.
    pub fn strict_lt(&self, a: &DVector<f64>, b: &DVector<f64>) -> Result<bool> {
        self.check_dim(a.len())?;
        self.check_dim(b.len())?;
        Ok((&self.matrix * (b - a)).iter().all(|&v| v > 0.0))
    }

    pub fn contains(&self, y: &DVector<f64>) -> Result<bool> {
        self.check_dim(y.len())?;
        Ok((&self.matrix * y).iter().all(|&v| v >= 0.0))
    }

    /// Rows of `A`; their convex hull is the base of the dual cone used by the
    /// direction subproblems.
    pub fn dual_base_vertices(&self) -> Vec<DVector<f64>> {
        (0..self.rows()).map(|i| self.row(i)).collect()
    }

    /// Multiplies row `i` by `factors[i] > 0`. The cone itself is unchanged.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), actual: factors.len() });
        }
        if factors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidCone("row factors must be positive".into()));
        }
        let mut matrix = self.matrix.clone();
        for (i, &f) in factors.iter().enumerate() {
            matrix.row_mut(i).scale_mut(f);
        }
        Ok(Self { name: self.name.clone(), matrix, generators: self.generators.clone() })
    }

    /// Divides row `i` by `divisors[i] > 0`.
    pub fn divide_rows(&self, divisors: &[f64]) -> Result<Self> {
        if divisors.len() != self.rows() {
            return Err(Error::DimensionMismatch { expected: self.rows(), actual: divisors.len() });
        }
        if divisors.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::InvalidCone("row divisors must be positive".into()));
        }
        let mut matrix = self.matrix.clone();
        for (i, &f) in divisors.iter().enumerate() {
            for v in matrix.row_mut(i).iter_mut() {
                *v /= f;
            }
        }
        Ok(Self { name: self.name.clone(), matrix, generators: self.generators.clone() })
    }

    /// Reorders the rows: row `i` of the result is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        let l = self.rows();
        let mut seen = vec![false; l];
        if order.len() != l || order.iter().any(|&i| i >= l || std::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidCone(format!("{order:?} is not a permutation of 0..{l}")));
        }
        let matrix = DMatrix::from_fn(l, self.dim(), |i, j| self.matrix[(order[i], j)]);
        Ok(Self { name: self.name.clone(), matrix, generators: self.generators.clone() })
    }

    /// Gradient-scaled transform: row `i` is divided by
    /// `max(1, ||row i of A JF(x0)||_inf)`.
    pub fn scaled_transform(&self, problem: &VectorProblem, x0: &DVector<f64>) -> Result<Self> {
        self.check_dim(problem.m())?;
        let jac = problem.jacobian(x0)?;
        let rows = &self.matrix * jac;
        let divisors: Vec<f64> = rows.row_iter().map(|r| r.amax().max(1.0)).collect();
        let mut scaled = self.divide_rows(&divisors)?;
        scaled.name = format!("{}^", self.name);
        Ok(scaled)
    }

    /// True when `K` is the nonnegative orthant, i.e. every row is a positive
    /// multiple of a unit vector and every coordinate is covered.
    pub fn is_orthant(&self) -> bool {
        let m = self.dim();
        let mut covered = vec![false; m];
        for row in self.matrix.row_iter() {
            let nz: Vec<usize> = (0..m).filter(|&j| row[j] != 0.0).collect();
            match nz.as_slice() {
                [j] if row[*j] > 0.0 => covered[*j] = true,
                _ => return false,
            }
        }
        covered.into_iter().all(|c| c)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: len });
        }
        Ok(())
    }
}

/// `x` in `cone(generators)`, decided by trying every subset of `m` generators
/// (Caratheodory) and checking for a nonnegative solution.
fn in_conic_hull(generators: &[DVector<f64>], x: &DVector<f64>, tol: f64) -> bool {
    let m = x.len();
    if x.iter().all(|&v| v == 0.0) {
        return true;
    }
    let k = generators.len();
    let scale = x.amax().max(1.0);
    for size in 1..=m.min(k) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let g = DMatrix::from_fn(m, size, |i, j| generators[idx[j]][i]);
            let gram = g.transpose() * &g;
            if let Some(coef) = gram.lu().solve(&(g.transpose() * x)) {
                let resid = (&g * &coef - x).amax();
                if resid <= 1e-9 * scale && coef.iter().all(|&c| c >= -tol) {
                    return true;
                }
            }
            if !next_combination(&mut idx, k) {
                break;
            }
        }
    }
    false
}

pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
