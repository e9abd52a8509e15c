//! Principal eigenelements of `Lr Q + (v p) Q = H(p) Q`.
//!
//! Two independent routes: Perron iteration on the shifted matrix
//! ([`solve_direct`]), and the fixed-point construction in which `H(p)` is the
//! `lambda` making the spectral radius of
//! `T_lambda = diag(1 / (sigma + lambda - v p)) P` equal to one
//! ([`solve_krein_rutman`]). The adjoint uses the weighted inner product
//! `<a|b> = sum_i w_i a_i b_i`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operators::{DiscreteOperator, OperatorKind};
use crate::perron::{perron_pair, PerronOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Direct,
    KreinRutman,
    ClosedForm,
}

#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub p: f64,
    pub h_value: f64,
    /// Normalized by `sum_i w_i q_i = 1`.
    pub q: Vec<f64>,
    /// Adjoint vector normalized by `sum_i w_i w_adj_i q_i = 1`, once computed.
    pub w_adj: Option<Vec<f64>>,
    pub residual: f64,
    pub method: Method,
    pub iterations: usize,
}

/// `matrix_ext + diag(v p)`.
pub fn shifted_matrix(op: &DiscreteOperator, p: f64) -> DMatrix<f64> {
    let mut a = op.matrix_ext().clone();
    for (i, v) in op.grid().nodes().iter().enumerate() {
        a[(i, i)] += v * p;
    }
    a
}

// sigma + |v p| covers BGK and kernel operators; the Neumann stencil has a
// negative diagonal of its own that the first term does not see.
fn perron_shift(op: &DiscreteOperator, a: &DMatrix<f64>, p: f64) -> f64 {
    let v = op.grid().nodes();
    let mut c = 0.0f64;
    for i in 0..op.len() {
        c = c.max(op.sigma()[i] + (v[i] * p).abs()).max(-a[(i, i)]);
    }
    c + 1.0
}

fn residual(a: &DMatrix<f64>, q: &[f64], h: f64) -> f64 {
    let qv = DVector::from_column_slice(q);
    let r = a * &qv - qv * h;
    r.amax()
}

fn check_residual(res: f64, h: f64, p: f64) -> Result<()> {
    if res <= 1e-8 * h.abs().max(1.0) {
        Ok(())
    } else {
        Err(Error::Inconsistent(format!("eigen-residual {res:.3e} too large at p = {p}")))
    }
}

/// Perron iteration on `matrix_ext + diag(v p) + cI`, started from `M`.
pub fn solve_direct(op: &DiscreteOperator, p: f64) -> Result<SpectralSolution> {
    solve_direct_with(op, p, &PerronOptions::default())
}

pub fn solve_direct_with(op: &DiscreteOperator, p: f64, opts: &PerronOptions) -> Result<SpectralSolution> {
    let a = shifted_matrix(op, p);
    let c = perron_shift(op, &a, p);
    let pair = perron_pair(&a, c, op.equilibrium().values(), op.grid().weights(), opts)?;
    let res = residual(&a, &pair.vector, pair.eigenvalue);
    check_residual(res, pair.eigenvalue, p)?;
    Ok(SpectralSolution {
        p,
        h_value: pair.eigenvalue,
        q: pair.vector,
        w_adj: None,
        residual: res,
        method: Method::Direct,
        iterations: pair.iterations,
    })
}

fn check_krein_rutman(op: &DiscreteOperator) -> Result<DMatrix<f64>> {
    if op.kind() == OperatorKind::EllipticNeumann {
        return Err(Error::Config("the fixed-point construction needs a kernel or BGK operator".into()));
    }
    let gain = op.gain();
    if gain.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::Config("the fixed-point construction needs a strictly positive gain operator".into()));
    }
    Ok(gain)
}

fn t_matrix(op: &DiscreteOperator, gain: &DMatrix<f64>, p: f64, lambda: f64) -> DMatrix<f64> {
    let v = op.grid().nodes();
    let s = op.sigma();
    let mut t = gain.clone();
    for i in 0..op.len() {
        let d = 1.0 / (s[i] + lambda - v[i] * p);
        for j in 0..op.len() {
            t[(i, j)] *= d;
        }
    }
    t
}

/// `lambda* = max_i (v_i p - sigma_i)`; `T_lambda` is defined above it.
pub fn lambda_star(op: &DiscreteOperator, p: f64) -> f64 {
    let v = op.grid().nodes();
    (0..op.len()).map(|i| v[i] * p - op.sigma()[i]).fold(f64::NEG_INFINITY, f64::max)
}

fn mu_pair(op: &DiscreteOperator, gain: &DMatrix<f64>, p: f64, lambda: f64) -> Result<(f64, Vec<f64>, usize)> {
    let t = t_matrix(op, gain, p, lambda);
    let pair = perron_pair(&t, 0.0, op.equilibrium().values(), op.grid().weights(), &PerronOptions::default())?;
    Ok((pair.eigenvalue, pair.vector, pair.iterations))
}

/// Spectral radius of `T_lambda` for `lambda > lambda*`.
pub fn krein_rutman_mu(op: &DiscreteOperator, p: f64, lambda: f64) -> Result<f64> {
    let gain = check_krein_rutman(op)?;
    let ls = lambda_star(op, p);
    if !(lambda > ls) {
        return Err(Error::Config(format!("lambda = {lambda} must exceed lambda* = {ls}")));
    }
    Ok(mu_pair(op, &gain, p, lambda)?.0)
}

/// `H(p)` as the root of `mu(lambda) = 1`, found by bisection.
pub fn solve_krein_rutman(op: &DiscreteOperator, p: f64) -> Result<SpectralSolution> {
    let gain = check_krein_rutman(op)?;
    let ls = lambda_star(op, p);
    let mut iterations = 0;
    let mut mu = |lambda: f64| -> Result<f64> {
        let (m, _, it) = mu_pair(op, &gain, p, lambda)?;
        iterations += it;
        Ok(m)
    };

    let mut offset = 1.0;
    let mut hi = ls + offset;
    let mut doublings = 0;
    let mut mu_hi = mu(hi)?;
    while mu_hi > 1.0 {
        if doublings == 60 {
            return Err(Error::Divergence { lambda: hi, mu: mu_hi });
        }
        offset *= 2.0;
        hi = ls + offset;
        mu_hi = mu(hi)?;
        doublings += 1;
    }
    // mu blows up at lambda*, so the root sits in (lambda*, hi]
    let mut lo = ls;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mu(mid)? > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (_, q, it) = mu_pair(op, &gain, p, lambda)?;
    iterations += it;
    let a = shifted_matrix(op, p);
    let res = residual(&a, &q, lambda);
    check_residual(res, lambda, p)?;
    Ok(SpectralSolution { p, h_value: lambda, q, w_adj: None, residual: res, method: Method::KreinRutman, iterations })
}

/// Adjoint eigenvector `W` of `A_p` with respect to `<.|.>_w`.
pub fn solve_adjoint(op: &DiscreteOperator, p: f64, sol: &SpectralSolution) -> Result<SpectralSolution> {
    let a = shifted_matrix(op, p);
    let w = op.grid().weights();
    let n = op.len();
    let b = DMatrix::from_fn(n, n, |i, j| a[(j, i)] * w[j] / w[i]);
    let c = perron_shift(op, &a, p);
    let pair = perron_pair(&b, c, &vec![1.0; n], w, &PerronOptions::default())?;
    if (pair.eigenvalue - sol.h_value).abs() > 1e-6 {
        return Err(Error::Inconsistent(format!(
            "adjoint eigenvalue {} differs from {} at p = {p}",
            pair.eigenvalue, sol.h_value
        )));
    }
    let pairing: f64 = (0..n).map(|i| w[i] * pair.vector[i] * sol.q[i]).sum();
    let mut out = sol.clone();
    out.w_adj = Some(pair.vector.iter().map(|x| x / pairing).collect());
    Ok(out)
}

/// `<W | v Q> / <W | Q>`, the derivative of `H` at `p`.
pub fn group_velocity(op: &DiscreteOperator, sol: &SpectralSolution) -> Result<f64> {
    let wa = sol
        .w_adj
        .as_ref()
        .ok_or_else(|| Error::Config("group velocity needs the adjoint eigenvector".into()))?;
    let (v, w) = (op.grid().nodes(), op.grid().weights());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..op.len() {
        let t = w[i] * wa[i] * sol.q[i];
        num += t * v[i];
        den += t;
    }
    Ok(num / den)
}

/// Root of `(1+r)/(2 v_max p) ln((a + v_max p)/(a - v_max p)) = 1` with
/// `a = 1 + r + H`, the BGK dispersion relation for a uniform equilibrium.
pub fn dispersion_bgk(v_max: f64, r: f64, p: f64) -> f64 {
    if p == 0.0 {
        return 0.0;
    }
    let s = 1.0 + r;
    let b = v_max * p.abs();
    // decreasing in h, +inf at the left end
    let f = |h: f64| {
        let a = s + h;
        s / (2.0 * b) * (2.0 * b / (a - b)).ln_1p() - 1.0
    };
    let mut lo = b - s;
    let mut hi = b + s + 10.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest second difference of tabulated values; negative means the
/// table is not convex. Reported, never enforced.
pub fn convexity_defect(p: &[f64], h: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 1..p.len().saturating_sub(1) {
        let l = (h[i] - h[i - 1]) / (p[i] - p[i - 1]);
        let r = (h[i + 1] - h[i]) / (p[i + 1] - p[i]);
        worst = worst.min((r - l) / (0.5 * (p[i + 1] - p[i - 1])));
    }
    worst
}
