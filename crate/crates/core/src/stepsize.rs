//! Barzilai-Borwein scalars and the two backtracking line searches.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cone::PolyhedralCone;
use crate::error::{Error, Result};
use crate::problems::Evaluator;

pub const DEFAULT_ALPHA_MIN: f64 = 1e-3;
pub const DEFAULT_ALPHA_MAX: f64 = 1e6;

/// Which branch produced a BB scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaTag {
    PositiveCurvature,
    NegativeCurvature,
    ZeroCurvature,
    ClampedLo,
    ClampedHi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub alpha: Vec<f64>,
    pub provenance: Vec<AlphaTag>,
}

impl AlphaVector {
    /// `(1, ..., 1)`, used when no displacement is available.
    pub fn ones(l: usize) -> Self {
        Self { alpha: vec![1.0; l], provenance: vec![AlphaTag::PositiveCurvature; l] }
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.alpha)
    }

    pub fn any_clamped(&self) -> bool {
        self.provenance.iter().any(|t| matches!(t, AlphaTag::ClampedLo | AlphaTag::ClampedHi))
    }

    /// True when every entry came from an unclamped curvature quotient, so the
    /// vector scales with positive row scalings of the transform matrix.
    pub fn is_scale_covariant(&self) -> bool {
        self.provenance
            .iter()
            .all(|t| matches!(t, AlphaTag::PositiveCurvature | AlphaTag::NegativeCurvature))
    }
}

/// Per-row BB scalars. Row `y_i` of `y` is row `i` of `A (JF(x_k) - JF(x_{k-1}))`
/// and `s = x_k - x_{k-1}`.
pub fn bb_alpha(s: &DVector<f64>, y: &DMatrix<f64>, amin: f64, amax: f64) -> Result<AlphaVector> {
    if !(amin > 0.0 && amin < amax) {
        return Err(Error::config(format!("need 0 < alpha_min < alpha_max, got {amin} and {amax}")));
    }
    if y.ncols() != s.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), actual: y.ncols() });
    }
    let ss = s.norm_squared();
    if ss == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    let snorm = ss.sqrt();
    let mut alpha = Vec::with_capacity(y.nrows());
    let mut provenance = Vec::with_capacity(y.nrows());
    for row in y.row_iter() {
        let sy = row.transpose().dot(s);
        let (raw, tag) = if sy > 0.0 {
            (sy / ss, AlphaTag::PositiveCurvature)
        } else if sy < 0.0 {
            (row.norm() / snorm, AlphaTag::NegativeCurvature)
        } else {
            (amin, AlphaTag::ZeroCurvature)
        };
        let (value, tag) = if raw < amin {
            (amin, AlphaTag::ClampedLo)
        } else if raw > amax {
            (amax, AlphaTag::ClampedHi)
        } else {
            (raw, tag)
        };
        alpha.push(value);
        provenance.push(tag);
    }
    Ok(AlphaVector { alpha, provenance })
}

/// Unclamped curvature vector in objective space: component `i` is
/// `<row i of dJ, s> / |s|^2`.
pub fn bb_vector_raw(s: &DVector<f64>, dj: &DMatrix<f64>) -> Result<DVector<f64>> {
    if dj.ncols() != s.len() {
        return Err(Error::DimensionMismatch { expected: s.len(), actual: dj.ncols() });
    }
    let ss = s.norm_squared();
    if ss == 0.0 {
        return Err(Error::ZeroDisplacement);
    }
    Ok(dj * s / ss)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub sigma: f64,
    pub gamma: f64,
    /// Largest backtracking exponent tried.
    pub jmax: u32,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self { sigma: 1e-4, gamma: 0.5, jmax: 50 }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::config(format!("sigma must lie in (0,1), got {}", self.sigma)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0,1), got {}", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptedCondition {
    Armijo,
    Majorization,
    /// Unit step taken without a test.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchResult {
    pub t: f64,
    /// Objective evaluations spent, `j + 1` for `t = gamma^j`.
    pub trials: usize,
    pub accepted: AcceptedCondition,
    /// `F(x + t d)` at the accepted step.
    pub f_new: DVector<f64>,
}

/// Armijo backtracking: the largest `t = gamma^j` with
/// `A (F(x + t d) - F(x)) <= sigma t (A JF(x) d)` componentwise.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search(
    eval: &mut Evaluator<'_>,
    cone: &PolyhedralCone,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    d: &DVector<f64>,
    row_products: &DVector<f64>,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    let slope = row_products * params.sigma;
    backtrack(eval, cone, x, fx, d, &slope, params, AcceptedCondition::Armijo)
}

/// Majorization backtracking: the largest `t = gamma^j` with
/// `A (F(x + t d) - F(x)) <= t (A JF(x) d + 0.5 |d|^2 alpha)` componentwise.
#[allow(clippy::too_many_arguments)]
pub fn mm_search(
    eval: &mut Evaluator<'_>,
    cone: &PolyhedralCone,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    d: &DVector<f64>,
    row_products: &DVector<f64>,
    alpha: &DVector<f64>,
    params: &LineSearchParams,
) -> Result<LineSearchResult> {
    if alpha.len() != row_products.len() {
        return Err(Error::DimensionMismatch { expected: row_products.len(), actual: alpha.len() });
    }
    let slope = row_products + alpha * (0.5 * d.norm_squared());
    backtrack(eval, cone, x, fx, d, &slope, params, AcceptedCondition::Majorization)
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    eval: &mut Evaluator<'_>,
    cone: &PolyhedralCone,
    x: &DVector<f64>,
    fx: &DVector<f64>,
    d: &DVector<f64>,
    slope: &DVector<f64>,
    params: &LineSearchParams,
    accepted: AcceptedCondition,
) -> Result<LineSearchResult> {
    params.validate()?;
    if slope.len() != cone.rows() {
        return Err(Error::DimensionMismatch { expected: cone.rows(), actual: slope.len() });
    }
    let mut t = 1.0;
    let mut trials = 0;
    for _ in 0..=params.jmax {
        trials += 1;
        let trial = x + d * t;
        match eval.eval(&trial) {
            Ok(f_new) => {
                let lhs = cone.transform(&(&f_new - fx))?;
                if lhs.iter().zip(slope.iter()).all(|(&a, &c)| a <= t * c) {
                    return Ok(LineSearchResult { t, trials, accepted, f_new });
                }
            }
            // a trial outside the domain counts as rejected
            Err(Error::NonFinite { .. }) => {}
            Err(e) => return Err(e),
        }
        t *= params.gamma;
    }
    Err(Error::LineSearchFailed { trials, last_step: t / params.gamma })
}

/// Guaranteed Armijo step for steepest directions on a problem whose
/// smoothness constant under the cone is `l_max`: `min(1, gamma / l_max)`.
pub fn armijo_step_bound(gamma: f64, l_max: f64) -> f64 {
    (gamma / l_max).min(1.0)
}

/// Guaranteed step when row `i` of the subproblem was divided by `alpha_i`:
/// `min(1, min_i gamma alpha_i / <A_i, ell>)`.
pub fn scaled_step_bound(gamma: f64, alpha: &DVector<f64>, a_ell: &DVector<f64>) -> f64 {
    alpha
        .iter()
        .zip(a_ell.iter())
        .map(|(a, l)| gamma * a / l)
        .fold(1.0, f64::min)
}
