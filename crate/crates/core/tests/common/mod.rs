//! Oracles shared by the integration tests.

use nalgebra::{DMatrix, DVector};

/// Negated minimum-norm point of the hull of the rows of `m`. Every support
/// set is tried: the affine hull of `p_0, ..., p_s` is written as
/// `p_0 + D mu` with `D = [p_1 - p_0, ...]`, `mu` comes from a least-squares
/// solve, and the smallest candidate with nonnegative weights wins.
pub fn brute_force_direction(m: &DMatrix<f64>) -> DVector<f64> {
    let l = m.nrows();
    let mut best: Option<DVector<f64>> = None;
    for mask in 1u32..(1 << l) {
        let idx: Vec<usize> = (0..l).filter(|i| mask & (1 << i) != 0).collect();
        let p0 = m.row(idx[0]).transpose();
        let s = idx.len() - 1;
        let (point, weights) = if s == 0 {
            (p0.clone(), DVector::from_element(1, 1.0))
        } else {
            let d = DMatrix::from_fn(m.ncols(), s, |r, c| m[(idx[c + 1], r)] - p0[r]);
            let Ok(mu) = d.clone().svd(true, true).solve(&(-&p0), 1e-13) else { continue };
            let mut w = DVector::zeros(s + 1);
            w[0] = 1.0 - mu.sum();
            w.rows_mut(1, s).copy_from(&mu);
            (&p0 + &d * &mu, w)
        };
        if weights.iter().any(|&w| w < -1e-12) {
            continue;
        }
        if best.as_ref().is_none_or(|b| point.norm() < b.norm()) {
            best = Some(point);
        }
    }
    -best.expect("singletons are always feasible")
}
