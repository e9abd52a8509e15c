//! Perron pairs of essentially nonnegative matrices.
//!
//! Plain power iteration on `A + cI` first. When the spectral gap is tiny
//! (large momenta give ratios like `1 - 1e-6`) that stalls, so after a budget
//! of plain steps we switch to shift-and-invert iteration with a shift above
//! the Collatz-Wielandt upper bound. `(sI - A)^{-1}` is then entrywise
//! nonnegative, so positivity of the iterate is kept.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct PerronOptions {
    /// Target for the relative change of eigenvalue and vector between steps,
    /// corrected by the observed contraction rate.
    pub tol: f64,
    pub max_iter: usize,
    /// Plain steps before switching to shift-and-invert; `None` never switches.
    pub accelerate_after: Option<usize>,
}

impl Default for PerronOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 100_000, accelerate_after: Some(1_000) }
    }
}

#[derive(Debug, Clone)]
pub struct PerronPair {
    pub eigenvalue: f64,
    /// Positive, normalized so that `sum_i w_i x_i = 1`.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub increment: f64,
}

// Change between iterates: eigenvalue increment and relative vector change.
// The eigenvalue alone is not enough: when the weights happen to be a left
// eigenvector the weighted estimate is exact from the first step on.
fn change(dl: f64, lambda: f64, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let dx = (x - y).amax() / x.amax();
    (dl / lambda.abs().max(1.0)).max(dx)
}

// Geometric-sequence estimate e * rho / (1 - rho) of the remaining error;
// changes at round-off level are accepted outright.
fn converged(e: f64, prev: f64, tol: f64) -> bool {
    if e <= 100.0 * f64::EPSILON {
        return true;
    }
    if !(e <= tol) || !prev.is_finite() {
        return false;
    }
    let rho = e / prev;
    rho < 1.0 && e * rho / (1.0 - rho) <= tol
}

fn weighted_sum(w: &[f64], x: &DVector<f64>) -> f64 {
    w.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

// Collatz-Wielandt bounds min/max (Ax)_i / x_i over entries with x_i > 0.
fn cw_bounds(ax: &DVector<f64>, x: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in ax.iter().zip(x.iter()) {
        if *b > 0.0 {
            let q = a / b;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    (lo, hi)
}

/// Perron eigenvalue of `a` (off-diagonal entries nonnegative, irreducible).
///
/// `shift` must make `a + shift I` nonnegative. `weights` define the
/// normalization and the Rayleigh-type estimate `sum w (Ax) / sum w x`.
pub fn perron_pair(
    a: &DMatrix<f64>,
    shift: f64,
    start: &[f64],
    weights: &[f64],
    opts: &PerronOptions,
) -> Result<PerronPair> {
    let n = a.nrows();
    let mut x = DVector::from_column_slice(start);
    let s0 = weighted_sum(weights, &x);
    x /= s0;
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }

    let mut lambda = f64::NAN;
    let mut increment = f64::INFINITY;
    let mut err = f64::INFINITY;
    let plain_budget = opts.accelerate_after.unwrap_or(opts.max_iter).min(opts.max_iter);
    let mut y = DVector::zeros(n);
    let mut it = 0;
    while it < plain_budget {
        it += 1;
        y.gemv(1.0, &shifted, &x, 0.0);
        let sy = weighted_sum(weights, &y);
        if !(sy > 0.0) {
            return Err(Error::Inconsistent(format!("power iterate lost positivity (mass {sy:e})")));
        }
        let new_lambda = sy - shift;
        increment = (new_lambda - lambda).abs();
        lambda = new_lambda;
        y /= sy;
        let prev = err;
        err = change(increment, lambda, &y, &x);
        std::mem::swap(&mut x, &mut y);
        if converged(err, prev, opts.tol) {
            return finish(lambda, x, it, increment);
        }
    }
    if opts.accelerate_after.is_none() || it >= opts.max_iter {
        return Err(Error::NoConvergence { iterations: it, increment });
    }

    // Shift-and-invert stage.
    let ax = a * &x;
    let (lo, hi) = cw_bounds(&ax, &x);
    let scale = hi.abs().max(1.0);
    let sigma = hi + (hi - lo).max(1e-10 * scale);
    let mut m = -a.clone();
    for i in 0..n {
        m[(i, i)] += sigma;
    }
    let lu = m.lu();
    while it < opts.max_iter {
        it += 1;
        let mut z = lu
            .solve(&x)
            .ok_or_else(|| Error::Inconsistent("shifted Perron matrix is singular".into()))?;
        let sz = weighted_sum(weights, &z);
        if !(sz > 0.0) {
            return Err(Error::Inconsistent(format!("inverse iterate lost positivity (mass {sz:e})")));
        }
        z /= sz;
        let az = a * &z;
        let new_lambda = weighted_sum(weights, &az);
        increment = (new_lambda - lambda).abs();
        lambda = new_lambda;
        let prev = err;
        err = change(increment, lambda, &z, &x);
        x = z;
        if converged(err, prev, opts.tol) {
            return finish(lambda, x, it, increment);
        }
    }
    Err(Error::NoConvergence { iterations: it, increment })
}

fn finish(eigenvalue: f64, x: DVector<f64>, iterations: usize, increment: f64) -> Result<PerronPair> {
    let min = x.min();
    if min < -1e-12 * x.amax() {
        return Err(Error::Inconsistent(format!("Perron vector has a negative entry {min:e}")));
    }
    Ok(PerronPair { eigenvalue, vector: x.as_slice().to_vec(), iterations, increment })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two() {
        // eigenvalues 3 and -1, Perron vector (1, 1)
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = perron_pair(&a, 0.0, &[1.0, 0.2], &[1.0, 1.0], &PerronOptions::default()).unwrap();
        assert!((p.eigenvalue - 3.0).abs() < 1e-12);
        assert!((p.vector[0] - 0.5).abs() < 1e-10 && (p.vector[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn shifted_negative_diagonal() {
        // path-graph Laplacian: Perron value 0 with constant vector
        let n = 20;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
            a[(i + 1, i)] = 1.0;
            a[(i, i)] -= 1.0;
            a[(i + 1, i + 1)] -= 1.0;
        }
        let start: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let p = perron_pair(&a, 5.0, &start, &vec![1.0; n], &PerronOptions::default()).unwrap();
        assert!(p.eigenvalue.abs() < 1e-10, "{}", p.eigenvalue);
        assert!(p.vector.iter().all(|v| (v - 1.0 / n as f64).abs() < 1e-6));
    }

    #[test]
    fn acceleration_handles_tiny_gaps() {
        // diag(1, 1 - 1e-7) coupled weakly
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1.0 - 1e-7]);
        let opts = PerronOptions { accelerate_after: Some(50), ..Default::default() };
        let p = perron_pair(&a, 0.0, &[1.0, 1.0], &[1.0, 1.0], &opts).unwrap();
        // exact value 1 + 1e-11 to leading order
        assert!((p.eigenvalue - 1.0 - 1e-11).abs() < 1e-13);
        assert!(p.iterations < 200);
        let opts = PerronOptions { accelerate_after: None, max_iter: 100, ..Default::default() };
        assert!(matches!(
            perron_pair(&a, 0.0, &[1.0, 1.0], &[1.0, 1.0], &opts),
            Err(Error::NoConvergence { .. })
        ));
    }
}
