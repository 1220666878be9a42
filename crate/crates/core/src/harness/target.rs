//! The fitting target `T = ∇φ` on the unit square.

use crate::error::{Error, Result};
use crate::numeric::{sym2_eigenvalues, Vector};

/// `T(x, y) = (4x³ + y/2 + x, 3y − y² + x/2)`.
pub fn target_eval(x: &[f64]) -> Result<Vector> {
    if x.len() != 2 {
        return Err(Error::dims("target_eval", 2, x.len()));
    }
    let (a, b) = (x[0], x[1]);
    Ok(Vector::from_raw(vec![4.0 * a * a * a + b / 2.0 + a, 3.0 * b - b * b + a / 2.0]))
}

/// `φ(x, y) = x⁴ + x²/2 + xy/2 + 3y²/2 − y³/3`, whose gradient is [`target_eval`].
pub fn potential(x: &[f64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(Error::dims("potential", 2, x.len()));
    }
    let (a, b) = (x[0], x[1]);
    Ok(a.powi(4) + a * a / 2.0 + a * b / 2.0 + 1.5 * b * b - b.powi(3) / 3.0)
}

/// Hessian of φ as `(φ_xx, φ_xy, φ_yy)`.
pub fn potential_hessian(x: f64, y: f64) -> (f64, f64, f64) {
    (12.0 * x * x + 1.0, 0.5, 3.0 - 2.0 * y)
}

/// Smallest Hessian eigenvalue of φ over a `res × res` grid on `[0,1]²`,
/// with the grid point attaining it.
pub fn min_hessian_eig_on_grid(res: usize) -> Result<(f64, [f64; 2])> {
    if res < 2 {
        return Err(Error::invalid(format!("grid resolution must be at least 2, got {res}")));
    }
    let step = 1.0 / (res - 1) as f64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for j in 0..res {
        for i in 0..res {
            let (x, y) = (i as f64 * step, j as f64 * step);
            let (a, b, d) = potential_hessian(x, y);
            let lo = sym2_eigenvalues(a, b, d).0;
            if lo < best.0 {
                best = (lo, [x, y]);
            }
        }
    }
    Ok(best)
}
