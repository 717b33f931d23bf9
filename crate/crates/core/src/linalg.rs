//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, SVD};

/// Default relative condition-number cap for Gram-matrix inversion.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

/// Largest singular value (operator 2-norm).
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Smallest singular value of a square or rectangular matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().min()
}

/// `sigma_max / sigma_min`; infinite when the matrix is singular.
pub fn condition_number(singular_values: &[f64]) -> f64 {
    let max = singular_values.iter().copied().fold(0.0_f64, f64::max);
    let min = singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `a * X = rhs` through a rank-revealing SVD of `a`.
///
/// Fails with the observed condition number if it exceeds `cap`; no
/// regularization is applied.
pub fn solve_capped(a: &DMatrix<f64>, rhs: &DMatrix<f64>, cap: f64) -> Result<DMatrix<f64>, f64> {
    let svd = SVD::new(a.clone(), true, true);
    let cond = condition_number(svd.singular_values.as_slice());
    if cond.is_nan() || cond > cap {
        return Err(cond);
    }
    svd.solve(rhs, 0.0).map_err(|_| cond)
}
