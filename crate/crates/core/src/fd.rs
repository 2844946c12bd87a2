//! Central finite differences.
//!
//! Used as the default derivative route for models without analytic
//! derivatives (the legged full model) and for second-order dynamics terms
//! when full DDP mode is requested.

use crate::{Matrix, Vector};

/// Default perturbation for first derivatives.
pub const STEP: f64 = 1e-6;

/// Jacobian of `f` at `x` by central differences, one column per input.
pub fn jacobian<F>(f: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> Vector,
{
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = xp[j];
        xp[j] = orig + step;
        let fp = f(&xp);
        xp[j] = orig - step;
        let fm = f(&xp);
        xp[j] = orig;
        cols.push((fp - fm) / (2.0 * step));
    }
    if cols.is_empty() {
        let rows = f(x).len();
        return Matrix::zeros(rows, 0);
    }
    Matrix::from_columns(&cols)
}

pub fn gradient<F>(f: F, x: &Vector, step: f64) -> Vector
where
    F: Fn(&Vector) -> f64,
{
    let mut xp = x.clone();
    Vector::from_fn(x.len(), |j, _| {
        let orig = xp[j];
        xp[j] = orig + step;
        let fp = f(&xp);
        xp[j] = orig - step;
        let fm = f(&xp);
        xp[j] = orig;
        (fp - fm) / (2.0 * step)
    })
}

/// Hessian of a scalar function by differencing its gradient; symmetrized.
pub fn hessian<F>(f: F, x: &Vector, step: f64) -> Matrix
where
    F: Fn(&Vector) -> f64,
{
    let h = jacobian(|y| gradient(&f, y, step), x, step);
    (&h + h.transpose()) * 0.5
}

/// Largest entrywise relative error `|a - b| / max(1, |b|)`, the measure used
/// by the derivative checks throughout the crate.
pub fn relative_error(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
