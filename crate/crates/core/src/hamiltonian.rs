//! Hamiltonians `H(p)`: closed forms, spectral tables, the minimal speed
//! `c* = inf_{p>0} (H(p) + r)/p`, the Lagrangian `L(q) = sup_p (pq - H(p) - r)`
//! and the Hopf-Lax solution `max(t L(x/t), 0)` for point-mass data.
//!
//! The Legendre route describes the PDE solution only for convex `H`. That
//! holds for the closed forms; for spectral tables it is checked numerically
//! (see [`crate::spectral::convexity_defect`]) and never assumed silently.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{golden_section, Pchip};
use crate::operators::DiscreteOperator;
use crate::spectral::solve_direct;

#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianKind {
    /// `D p^2`, the Fisher-KPP case.
    Quadratic { d: f64 },
    /// `v_max p coth(v_max p / (1+r)) - (1+r)`.
    BgkClosed { v_max: f64, r: f64 },
    /// `sigma^4 p^2`.
    Vfp { sigma: f64 },
    /// `exp(p^2/2) - 1`.
    NonlocalGaussian,
    /// `p^2 / (1 - p^2)` on `(-1, 1)`.
    NonlocalLaplace,
    Tabulated(Pchip),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianModel {
    kind: HamiltonianKind,
    /// Global bound on `|H'|`; `None` for kinds with unbounded slope.
    lipschitz_bound: Option<f64>,
    /// Largest `|dH/dp|` between table nodes.
    measured_lipschitz: Option<f64>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {x}")))
    }
}

// x coth x - 1 and its derivative, with series near 0
fn xcothx_m1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        let x2 = x * x;
        x2 / 3.0 - x2 * x2 / 45.0
    } else if a > 20.0 {
        a - 1.0 + 2.0 * a * (-2.0 * a).exp()
    } else {
        a / a.tanh() - 1.0
    }
}

fn xcothx_deriv(x: f64) -> f64 {
    let a = x.abs();
    let d = if a < 1e-4 {
        2.0 * a / 3.0 - 4.0 * a.powi(3) / 45.0
    } else if a > 350.0 {
        1.0
    } else {
        let s = a.sinh();
        1.0 / a.tanh() - a / (s * s)
    };
    d.copysign(x)
}

impl HamiltonianModel {
    pub fn quadratic(d: f64) -> Result<Self> {
        positive("diffusion coefficient", d)?;
        Ok(Self { kind: HamiltonianKind::Quadratic { d }, lipschitz_bound: None, measured_lipschitz: None })
    }

    pub fn bgk_closed(v_max: f64, r: f64) -> Result<Self> {
        positive("v_max", v_max)?;
        if !(r >= 0.0) {
            return Err(Error::Config(format!("growth rate must be >= 0, got {r}")));
        }
        Ok(Self { kind: HamiltonianKind::BgkClosed { v_max, r }, lipschitz_bound: Some(v_max), measured_lipschitz: None })
    }

    pub fn vfp(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Self { kind: HamiltonianKind::Vfp { sigma }, lipschitz_bound: None, measured_lipschitz: None })
    }

    pub fn nonlocal_gaussian() -> Self {
        Self { kind: HamiltonianKind::NonlocalGaussian, lipschitz_bound: None, measured_lipschitz: None }
    }

    pub fn nonlocal_laplace() -> Self {
        Self { kind: HamiltonianKind::NonlocalLaplace, lipschitz_bound: None, measured_lipschitz: None }
    }

    /// Table with monotone cubic interpolation. `p` must be strictly
    /// increasing and symmetric about zero.
    pub fn tabulated(p: Vec<f64>, h: Vec<f64>, lipschitz_bound: Option<f64>) -> Result<Self> {
        if p.len() < 3 || p.len() != h.len() {
            return Err(Error::Config("a table needs at least 3 matching (p, H) pairs".into()));
        }
        if !p.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("table momenta must be strictly increasing".into()));
        }
        let n = p.len();
        let scale = p[n - 1].abs().max(1.0);
        if (0..n).any(|i| (p[i] + p[n - 1 - i]).abs() > 1e-12 * scale) {
            return Err(Error::Config("table momenta must be symmetric about 0".into()));
        }
        let measured = p
            .windows(2)
            .zip(h.windows(2))
            .map(|(pp, hh)| ((hh[1] - hh[0]) / (pp[1] - pp[0])).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            kind: HamiltonianKind::Tabulated(Pchip::new(p, h)),
            lipschitz_bound,
            measured_lipschitz: Some(measured),
        })
    }

    pub fn kind(&self) -> &HamiltonianKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            HamiltonianKind::Quadratic { .. } => "quadratic",
            HamiltonianKind::BgkClosed { .. } => "bgk-closed",
            HamiltonianKind::Vfp { .. } => "vfp",
            HamiltonianKind::NonlocalGaussian => "nonlocal-gaussian",
            HamiltonianKind::NonlocalLaplace => "nonlocal-laplace",
            HamiltonianKind::Tabulated(_) => "tabulated",
        }
    }

    pub fn lipschitz_bound(&self) -> Option<f64> {
        self.lipschitz_bound
    }

    pub fn measured_lipschitz(&self) -> Option<f64> {
        self.measured_lipschitz
    }

    pub fn with_lipschitz_bound(mut self, alpha: f64) -> Self {
        self.lipschitz_bound = Some(alpha);
        self
    }

    /// Closed interval of admissible momenta (open ends are pulled in by 1e-9).
    pub fn domain(&self) -> (f64, f64) {
        match &self.kind {
            HamiltonianKind::NonlocalLaplace => (-1.0 + 1e-9, 1.0 - 1e-9),
            HamiltonianKind::Tabulated(t) => (t.x()[0], t.x()[t.x().len() - 1]),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Table nodes, if any.
    pub fn table(&self) -> Option<(&[f64], &[f64])> {
        match &self.kind {
            HamiltonianKind::Tabulated(t) => Some((t.x(), t.y())),
            _ => None,
        }
    }

    fn check_domain(&self, p: f64) -> Result<()> {
        match &self.kind {
            HamiltonianKind::NonlocalLaplace if !(p.abs() < 1.0) => Err(Error::Domain { p }),
            HamiltonianKind::Tabulated(t) => {
                let (lo, hi) = (t.x()[0], t.x()[t.x().len() - 1]);
                let slack = 1e-12 * hi.abs().max(1.0);
                if p < lo - slack || p > hi + slack || p.is_nan() {
                    Err(Error::OutOfRange { p, lo, hi })
                } else {
                    Ok(())
                }
            }
            _ if p.is_nan() => Err(Error::Domain { p }),
            _ => Ok(()),
        }
    }

    pub fn eval(&self, p: f64) -> Result<f64> {
        self.check_domain(p)?;
        Ok(match &self.kind {
            HamiltonianKind::Quadratic { d } => d * p * p,
            HamiltonianKind::BgkClosed { v_max, r } => {
                let s = 1.0 + r;
                s * xcothx_m1(v_max * p / s)
            }
            HamiltonianKind::Vfp { sigma } => sigma.powi(4) * p * p,
            HamiltonianKind::NonlocalGaussian => (0.5 * p * p).exp_m1(),
            HamiltonianKind::NonlocalLaplace => p * p / (1.0 - p * p),
            HamiltonianKind::Tabulated(t) => t.eval_with_derivative(p).0,
        })
    }

    pub fn deriv(&self, p: f64) -> Result<f64> {
        self.check_domain(p)?;
        Ok(match &self.kind {
            HamiltonianKind::Quadratic { d } => 2.0 * d * p,
            HamiltonianKind::BgkClosed { v_max, r } => v_max * xcothx_deriv(v_max * p / (1.0 + r)),
            HamiltonianKind::Vfp { sigma } => 2.0 * sigma.powi(4) * p,
            HamiltonianKind::NonlocalGaussian => p * (0.5 * p * p).exp(),
            HamiltonianKind::NonlocalLaplace => 2.0 * p / (1.0 - p * p).powi(2),
            HamiltonianKind::Tabulated(t) => t.eval_with_derivative(p).1,
        })
    }

    /// `sup |H'|` over `|p| <= 2 max_gradient`, the slope range an HJ run
    /// started from data with that Lipschitz constant can visit.
    pub fn effective_lipschitz(&self, max_gradient: f64) -> Result<f64> {
        let reach = 2.0 * max_gradient.abs();
        let (lo, hi) = self.domain();
        if reach > hi || -reach < lo {
            return Err(Error::Domain { p: reach });
        }
        let mut sup = 0.0f64;
        for k in 0..=400 {
            let p = -reach + 2.0 * reach * k as f64 / 400.0;
            sup = sup.max(self.deriv(p)?.abs());
        }
        Ok(sup)
    }
}

/// Tabulates `H` from the spectral solver on a symmetric momentum grid.
/// Independent momenta are solved in parallel; results keep grid order.
pub fn tabulate(op: &DiscreteOperator, p_grid: &[f64]) -> Result<HamiltonianModel> {
    let n = p_grid.len();
    if n < 3 || (0..n).any(|i| (p_grid[i] + p_grid[n - 1 - i]).abs() > 1e-12 * p_grid[n - 1].abs().max(1.0)) {
        return Err(Error::Config("the momentum grid must be symmetric with at least 3 points".into()));
    }
    let h: Vec<f64> = p_grid
        .par_iter()
        .map(|&p| {
            solve_direct(op, p)
                .map(|s| s.h_value)
                .map_err(|e| Error::Tabulation { p, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    HamiltonianModel::tabulated(p_grid.to_vec(), h, Some(op.grid().v_max()))
}

/// Uniform symmetric momentum grid `-p_max..=p_max` with step close to `dp`.
pub fn symmetric_grid(p_max: f64, dp: f64) -> Vec<f64> {
    let half = (p_max / dp).ceil().max(1.0) as usize;
    let step = p_max / half as f64;
    let mut g: Vec<f64> = (0..=2 * half).map(|k| (k as f64 - half as f64) * step).collect();
    g[half] = 0.0;
    for k in 0..half {
        g[2 * half - k] = -g[k];
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedResult {
    pub c_star: f64,
    pub p_star: f64,
    pub iterations: usize,
    /// `(H + r)/p` was still decreasing at the search edge, so `c_star`
    /// is only an upper bound.
    pub at_horizon: bool,
}

/// Minimizes `g(p) = (H(p) + r)/p` over `p > 0` by golden-section search.
pub fn min_wave_speed(model: &HamiltonianModel, r: f64) -> Result<SpeedResult> {
    if !(r > 0.0) {
        return Err(Error::Config(format!("the minimal speed needs r > 0, got {r}")));
    }
    let g = |p: f64| -> Result<f64> { Ok((model.eval(p)? + r) / p) };
    let p_lo = 1e-6;
    let cap = model.domain().1;
    let mut p_hi;
    let mut iterations = 0;
    if model.table().is_some() {
        p_hi = cap;
    } else {
        p_hi = cap.min(1.0);
        let mut g_hi = g(p_hi)?;
        for _ in 0..60 {
            let next = cap.min(2.0 * p_hi);
            if next <= p_hi {
                break;
            }
            let g_next = g(next)?;
            iterations += 1;
            p_hi = next;
            if g_next > g_hi {
                break;
            }
            g_hi = g_next;
        }
    }

    let mut failure = None;
    let (mut p_star, _, it) = golden_section(
        |p| match g(p) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        p_lo,
        p_hi,
        1e-10,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    iterations += it;

    // polish on the first-order condition p H'(p) = H(p) + r, increasing for convex H
    let foc = |p: f64| -> Result<f64> { Ok(p * model.deriv(p)? - model.eval(p)? - r) };
    let delta = 1e-6 * p_star.max(1.0);
    let (a, b) = ((p_star - delta).max(p_lo), (p_star + delta).min(p_hi));
    let (fa, fb) = (foc(a)?, foc(b)?);
    if fa < 0.0 && fb > 0.0 {
        let (mut lo, mut hi) = (a, b);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if foc(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
        }
        p_star = 0.5 * (lo + hi);
    }

    let edge = p_hi - 1e-6 * p_hi.max(1.0);
    let at_horizon = p_star >= edge && g(edge)? > g(p_hi)?;
    Ok(SpeedResult { c_star: g(p_star)?, p_star, iterations, at_horizon })
}

/// `L(q) = sup_p (p q - H(p) - r)` evaluated by a grid search over `p`
/// refined by golden-section on the bracketing cells.
#[derive(Debug, Clone)]
pub struct Lagrangian<'a> {
    model: &'a HamiltonianModel,
    r: f64,
    p: Vec<f64>,
    hr: Vec<f64>,
}

impl<'a> Lagrangian<'a> {
    /// Search grid sized so the maximizer is interior for `|q| <= q_max`
    /// where the model allows it. Tables use their own nodes.
    pub fn new(model: &'a HamiltonianModel, r: f64, q_max: f64) -> Result<Self> {
        let p: Vec<f64> = match model.table() {
            Some((nodes, _)) => nodes.to_vec(),
            None => {
                let (_, cap) = model.domain();
                let mut big = 1.0f64.min(cap);
                for _ in 0..60 {
                    if big >= cap || model.deriv(big)? > 1.1 * q_max.abs() || big >= 1e3 {
                        break;
                    }
                    big = (2.0 * big).min(cap);
                }
                let m = 4000;
                (0..=m).map(|k| -big + 2.0 * big * k as f64 / m as f64).collect()
            }
        };
        let hr = p.iter().map(|&x| model.eval(x).map(|h| h + r)).collect::<Result<Vec<_>>>()?;
        Ok(Self { model, r, p, hr })
    }

    pub fn eval(&self, q: f64) -> f64 {
        let (k, _) = self
            .p
            .iter()
            .zip(&self.hr)
            .map(|(p, h)| p * q - h)
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let a = self.p[k.saturating_sub(1)];
        let b = self.p[(k + 1).min(self.p.len() - 1)];
        let f = |p: f64| match self.model.eval(p) {
            Ok(h) => -(p * q - h - self.r),
            Err(_) => f64::INFINITY,
        };
        let (_, neg, _) = golden_section(f, a, b, 1e-12 * b.abs().max(1.0));
        let grid_best = self.p[k] * q - self.hr[k];
        grid_best.max(-neg)
    }

    /// Smallest `q >= 0` with `L(q) = 0`, searched up to `q_hi`.
    pub fn zero_crossing(&self, q_hi: f64) -> Option<f64> {
        if self.eval(0.0) >= 0.0 || self.eval(q_hi) < 0.0 {
            return None;
        }
        let (mut lo, mut hi) = (0.0, q_hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

#[derive(Debug, Clone)]
pub struct LegendreResult {
    pub q: Vec<f64>,
    pub values: Vec<f64>,
    pub zero_crossing: Option<f64>,
}

pub fn legendre(model: &HamiltonianModel, r: f64, q_grid: &[f64]) -> Result<LegendreResult> {
    let q_max = q_grid.iter().fold(0.0f64, |a, q| a.max(q.abs()));
    let lag = Lagrangian::new(model, r, q_max)?;
    let values: Vec<f64> = q_grid.iter().map(|&q| lag.eval(q)).collect();
    Ok(LegendreResult { q: q_grid.to_vec(), values, zero_crossing: lag.zero_crossing(q_max) })
}

/// `max(t L(x/t), 0)` on the given points.
pub fn hopf_lax_solution(model: &HamiltonianModel, r: f64, t: f64, x: &[f64]) -> Result<Vec<f64>> {
    positive("time", t)?;
    let q_max = x.iter().fold(0.0f64, |a, v| a.max(v.abs())) / t;
    let lag = Lagrangian::new(model, r, q_max)?;
    Ok(x.iter().map(|&xi| (t * lag.eval(xi / t)).max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_bgk;
    use crate::velocity::{make_gauss_grid, uniform_equilibrium};
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(HamiltonianModel::quadratic(1.0).unwrap().eval(3.0).unwrap(), 9.0);
        assert_eq!(HamiltonianModel::vfp(1.0).unwrap().eval(2.0).unwrap(), 4.0);
        let lap = HamiltonianModel::nonlocal_laplace();
        assert!((lap.eval(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(lap.eval(1.0).is_err());
        let g = HamiltonianModel::nonlocal_gaussian();
        assert!((g.eval(1.0).unwrap() - (0.5f64.exp() - 1.0)).abs() < 1e-15);
        let b = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
        for p in [1e-6f64, 0.3, 2.0, 30.0] {
            let exact = p / (p / 2.0).tanh() - 2.0;
            assert!((b.eval(p).unwrap() - exact).abs() < 1e-12 * exact.max(1.0));
        }
        for m in [HamiltonianModel::quadratic(2.0).unwrap(), b, g, lap] {
            assert_eq!(m.eval(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let models = [
            HamiltonianModel::quadratic(0.7).unwrap(),
            HamiltonianModel::bgk_closed(1.5, 0.5).unwrap(),
            HamiltonianModel::vfp(1.2).unwrap(),
            HamiltonianModel::nonlocal_gaussian(),
            HamiltonianModel::nonlocal_laplace(),
        ];
        for m in &models {
            for p in [-0.6, 1e-5, 0.2, 0.9] {
                let h = 1e-6;
                let fd = (m.eval(p + h).unwrap() - m.eval(p - h).unwrap()) / (2.0 * h);
                let d = m.deriv(p).unwrap();
                assert!((fd - d).abs() < 1e-6 * d.abs().max(1.0), "{} at {p}: {d} vs {fd}", m.name());
            }
        }
    }

    #[test]
    fn tabulated_range_is_enforced() {
        let p = symmetric_grid(2.0, 0.5);
        let h: Vec<f64> = p.iter().map(|x| x * x).collect();
        let t = HamiltonianModel::tabulated(p, h, None).unwrap();
        assert!((t.eval(1.25).unwrap() - 1.5625).abs() < 0.02);
        assert!(matches!(t.eval(2.1), Err(Error::OutOfRange { .. })));
        assert!(HamiltonianModel::tabulated(vec![0.0, 1.0, 2.0], vec![0.0; 3], None).is_err());
    }

    #[test]
    fn bgk_table_matches_closed_form() {
        let g = make_gauss_grid(1.0, 401).unwrap();
        let op = build_bgk(&g, &uniform_equilibrium(&g), 1.0).unwrap();
        let grid = symmetric_grid(3.0, 0.25);
        let t = tabulate(&op, &grid).unwrap();
        let c = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
        let (p, h) = t.table().unwrap();
        let n = p.len();
        for i in 0..n {
            assert!((h[i] - c.eval(p[i]).unwrap()).abs() < 1e-6);
            assert!((h[i] - h[n - 1 - i]).abs() < 1e-9);
        }
        assert!(t.measured_lipschitz().unwrap() <= 1.0 + 1e-6);
        assert_eq!(t.lipschitz_bound(), Some(1.0));
    }

    #[test]
    fn quadratic_speed() {
        let s = min_wave_speed(&HamiltonianModel::quadratic(1.0).unwrap(), 1.0).unwrap();
        assert!((s.c_star - 2.0).abs() < 1e-10);
        assert!((s.p_star - 1.0).abs() < 1e-8);
        assert!(!s.at_horizon);
        for (d, r) in [(0.5, 2.0), (3.0, 0.1)] {
            let s = min_wave_speed(&HamiltonianModel::quadratic(d).unwrap(), r).unwrap();
            assert!((s.c_star - 2.0 * (r * d).sqrt()).abs() < 1e-9);
        }
        assert!(min_wave_speed(&HamiltonianModel::quadratic(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn bgk_speed_against_grid_scan() {
        let m = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
        let s = min_wave_speed(&m, 1.0).unwrap();
        let scan = (1..20000)
            .map(|k| k as f64 * 1e-3)
            .map(|p| (m.eval(p).unwrap() + 1.0) / p)
            .fold(f64::INFINITY, f64::min);
        assert!(s.c_star <= scan + 1e-12 && scan - s.c_star < 1e-6);
        // slower than the diffusive speed 2, and below v_max
        assert!(s.c_star < 1.0);
        let foc = s.p_star * m.deriv(s.p_star).unwrap() - m.eval(s.p_star).unwrap() - 1.0;
        assert!(foc.abs() < 1e-6);
        assert!((m.eval(s.p_star).unwrap() + 1.0 - s.c_star * s.p_star).abs() < 1e-8);
    }

    #[test]
    fn truncated_table_reports_horizon() {
        let p = symmetric_grid(0.5, 0.05);
        let h: Vec<f64> = p.iter().map(|x| x * x).collect();
        let t = HamiltonianModel::tabulated(p, h, None).unwrap();
        let s = min_wave_speed(&t, 1.0).unwrap();
        assert!(s.at_horizon);
    }

    #[test]
    fn quadratic_lagrangian() {
        let m = HamiltonianModel::quadratic(1.0).unwrap();
        let q: Vec<f64> = (0..=40).map(|k| -4.0 + 0.2 * k as f64).collect();
        let l = legendre(&m, 1.0, &q).unwrap();
        for (qi, li) in q.iter().zip(&l.values) {
            assert!((li - (qi * qi / 4.0 - 1.0)).abs() < 1e-9);
        }
        assert!((l.zero_crossing.unwrap() - 2.0).abs() < 1e-9);
        let phi = hopf_lax_solution(&m, 1.0, 1.0, &[3.0, 0.5]).unwrap();
        assert!((phi[0] - 1.25).abs() < 1e-9);
        assert_eq!(phi[1], 0.0);
    }

    #[test]
    fn lagrangian_vanishes_at_minimal_speed() {
        for (m, r) in [
            (HamiltonianModel::bgk_closed(1.0, 1.0).unwrap(), 1.0),
            (HamiltonianModel::nonlocal_gaussian(), 0.5),
            (HamiltonianModel::nonlocal_laplace(), 1.0),
            (HamiltonianModel::vfp(1.5).unwrap(), 2.0),
        ] {
            let s = min_wave_speed(&m, r).unwrap();
            let lag = Lagrangian::new(&m, r, 2.0 * s.c_star).unwrap();
            assert!(lag.eval(s.c_star).abs() < 1e-6, "{}: {}", m.name(), lag.eval(s.c_star));
            assert!((lag.zero_crossing(2.0 * s.c_star).unwrap() - s.c_star).abs() < 1e-6);
        }
    }

    #[test]
    fn biconjugation_recovers_h_plus_r() {
        let m = HamiltonianModel::quadratic(1.0).unwrap();
        let q: Vec<f64> = (0..=4000).map(|k| -4.0 + 0.002 * k as f64).collect();
        let l = legendre(&m, 1.0, &q).unwrap();
        for p in [-1.0, -0.3, 0.0, 0.8] {
            let back = q.iter().zip(&l.values).map(|(qi, li)| p * qi - li).fold(f64::NEG_INFINITY, f64::max);
            assert!((back - (p * p + 1.0)).abs() < 1e-6);
        }
    }

    #[test]
    fn nullset_radius_is_c_star_t() {
        let m = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
        let s = min_wave_speed(&m, 1.0).unwrap();
        let t = 3.0;
        let x: Vec<f64> = (0..=600).map(|k| k as f64 * 0.005).collect();
        let phi = hopf_lax_solution(&m, 1.0, t, &x).unwrap();
        let edge = x.iter().zip(&phi).filter(|(_, p)| **p == 0.0).map(|(x, _)| *x).fold(0.0, f64::max);
        assert!((edge - s.c_star * t).abs() <= 0.005);
    }

    proptest! {
        #[test]
        fn hopf_lax_is_homogeneous(x in -5.0f64..5.0, t in 0.2f64..3.0, lam in 0.3f64..3.0) {
            let m = HamiltonianModel::quadratic(1.0).unwrap();
            let a = hopf_lax_solution(&m, 1.0, lam * t, &[lam * x]).unwrap()[0];
            let b = hopf_lax_solution(&m, 1.0, t, &[x]).unwrap()[0];
            prop_assert!((a - lam * b).abs() < 1e-8 * a.abs().max(1.0));
        }

        #[test]
        fn lagrangian_nondecreasing_for_positive_q(q1 in 0.0f64..3.0, dq in 0.0f64..1.0) {
            let m = HamiltonianModel::bgk_closed(1.0, 1.0).unwrap();
            let lag = Lagrangian::new(&m, 1.0, 4.0).unwrap();
            prop_assert!(lag.eval(q1 + dq) >= lag.eval(q1) - 1e-12);
        }

        #[test]
        fn closed_forms_even(p in -0.99f64..0.99) {
            for m in [
                HamiltonianModel::quadratic(1.3).unwrap(),
                HamiltonianModel::bgk_closed(2.0, 0.4).unwrap(),
                HamiltonianModel::nonlocal_gaussian(),
                HamiltonianModel::nonlocal_laplace(),
            ] {
                prop_assert!((m.eval(p).unwrap() - m.eval(-p).unwrap()).abs() < 1e-12);
            }
        }
    }
}
