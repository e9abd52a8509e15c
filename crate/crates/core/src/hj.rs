//! Monotone Lax-Friedrichs scheme for `phi_t + H(phi_x) + r = 0` and its
//! obstacle form `min{phi_t + H(phi_x) + r, phi} = 0`, with front tracking.
//!
//! Numerical Hamiltonian `H((a+b)/2) - alpha (b-a)/2` on the backward slope
//! `a` and forward slope `b`; with `alpha >= sup|H'|` and
//! `dt alpha / dx <= 0.9` the update is nondecreasing in every neighbour.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hamiltonian::{hopf_lax_solution, min_wave_speed, HamiltonianModel};
use crate::numerics::ls_slope;

pub const MAX_CFL: f64 = 0.9;

/// Uniform 1-D grid `x_min + i dx`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XGrid {
    pub x_min: f64,
    pub dx: f64,
    pub n: usize,
}

impl XGrid {
    /// Nodes `-x_max..=x_max`; `x_max` is rounded to a multiple of `dx`.
    pub fn symmetric(x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) || !(x_max > 0.0) {
            return Err(Error::Config(format!("grid needs dx > 0 and x_max > 0, got {dx}, {x_max}")));
        }
        let half = (x_max / dx).round() as usize;
        if half < 1 {
            return Err(Error::Config("grid has fewer than 3 nodes".into()));
        }
        Ok(Self { x_min: -(half as f64) * dx, dx, n: 2 * half + 1 })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Largest `|x|` on the grid.
    pub fn x_max(&self) -> f64 {
        self.x(0).abs().max(self.x(self.n - 1).abs())
    }
}

/// Largest one-sided difference quotient.
pub fn max_gradient(phi: &[f64], dx: f64) -> f64 {
    phi.windows(2).map(|w| ((w[1] - w[0]) / dx).abs()).fold(0.0, f64::max)
}

/// `min(slope |x|, cap)`, the point-mass initial data.
pub fn point_cone(grid: &XGrid, slope: f64, cap: f64) -> Vec<f64> {
    grid.points().iter().map(|x| (slope * x.abs()).min(cap)).collect()
}

/// One node of the scheme.
#[allow(clippy::too_many_arguments)]
pub(crate) fn lf_update(
    h: &HamiltonianModel,
    left: f64,
    centre: f64,
    right: f64,
    dx: f64,
    dt: f64,
    alpha: f64,
    r: f64,
    constrained: bool,
) -> Result<f64> {
    let a = (centre - left) / dx;
    let b = (right - centre) / dx;
    let flux = h.eval(0.5 * (a + b))? - 0.5 * alpha * (b - a);
    let next = centre - dt * (flux + r);
    Ok(if constrained { next.max(0.0) } else { next })
}

#[derive(Debug, Clone)]
pub struct HjField {
    pub grid: XGrid,
    pub phi: Vec<f64>,
    pub time: f64,
    pub dt: f64,
    pub alpha: f64,
    pub model: HamiltonianModel,
    pub r: f64,
    pub constrained: bool,
}

impl HjField {
    /// `alpha` is the model's global Lipschitz bound, or for unbounded
    /// Hamiltonians `sup|H'|` over twice the initial slope range.
    pub fn new(
        model: HamiltonianModel,
        r: f64,
        constrained: bool,
        grid: XGrid,
        phi0: Vec<f64>,
        cfl: f64,
    ) -> Result<Self> {
        if phi0.len() != grid.n {
            return Err(Error::LengthMismatch { expected: grid.n, got: phi0.len() });
        }
        if !(cfl > 0.0 && cfl <= MAX_CFL) {
            return Err(Error::Config(format!("cfl must lie in (0, {MAX_CFL}], got {cfl}")));
        }
        if !(r >= 0.0) {
            return Err(Error::Config(format!("growth rate must be >= 0, got {r}")));
        }
        if constrained && phi0.iter().any(|p| *p < 0.0) {
            return Err(Error::Config("initial data must be nonnegative".into()));
        }
        let alpha = match model.lipschitz_bound() {
            Some(a) => a,
            None => model.effective_lipschitz(max_gradient(&phi0, grid.dx))?,
        }
        .max(1e-12);
        let dt = cfl * grid.dx / alpha;
        Ok(Self { grid, phi: phi0, time: 0.0, dt, alpha, model, r, constrained })
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.dt)
    }

    /// Advances by `dt`, rejected if it breaks the CFL bound.
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let ratio = dt * self.alpha / self.grid.dx;
        if ratio > MAX_CFL * (1.0 + 1e-12) {
            return Err(Error::Cfl { ratio, limit: MAX_CFL });
        }
        let n = self.grid.n;
        let phi = &self.phi;
        let node = |i: usize| {
            // outflow: copy the boundary value into the ghost cell
            let left = if i == 0 { phi[0] } else { phi[i - 1] };
            let right = if i + 1 == n { phi[n - 1] } else { phi[i + 1] };
            lf_update(&self.model, left, phi[i], right, self.grid.dx, dt, self.alpha, self.r, self.constrained)
        };
        let next: Vec<f64> = if n >= 4096 {
            (0..n).into_par_iter().map(node).collect::<Result<_>>()?
        } else {
            (0..n).map(node).collect::<Result<_>>()?
        };
        self.phi = next;
        self.time += dt;
        Ok(())
    }

    /// Rightmost point with `phi < zero_tol`, interpolated towards the next node.
    pub fn front(&self, zero_tol: f64) -> Option<f64> {
        let i = self.phi.iter().rposition(|p| *p < zero_tol)?;
        if i + 1 == self.grid.n {
            return Some(self.grid.x(i));
        }
        let (a, b) = (self.phi[i], self.phi[i + 1]);
        Some(self.grid.x(i) + (zero_tol - a) / (b - a) * self.grid.dx)
    }
}

#[derive(Debug, Clone)]
pub struct FrontReport {
    pub times: Vec<f64>,
    pub front_positions: Vec<f64>,
    /// Least-squares slope over the second half of the run.
    pub fitted_speed: Option<f64>,
    pub predicted_c_star: Option<f64>,
    pub relative_error: Option<f64>,
}

impl FrontReport {
    /// Slope fitted on samples with `t >= t_from`.
    pub fn speed_after(&self, t_from: f64) -> Option<f64> {
        let (t, x): (Vec<f64>, Vec<f64>) = self
            .times
            .iter()
            .zip(&self.front_positions)
            .filter(|(t, _)| **t >= t_from)
            .map(|(t, x)| (*t, *x))
            .unzip();
        ls_slope(&t, &x)
    }

    /// Largest backward jump of the front, which should stay below one cell.
    pub fn max_retreat(&self) -> f64 {
        self.front_positions.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HjOptions {
    pub cfl: f64,
    pub zero_tol: f64,
    /// Front sampling interval; defaults to `T / 500`.
    pub sample_dt: Option<f64>,
    /// Interval between stored snapshots of the whole field; none if `None`.
    pub snapshot_dt: Option<f64>,
}

impl Default for HjOptions {
    fn default() -> Self {
        Self { cfl: MAX_CFL, zero_tol: 1e-6, sample_dt: None, snapshot_dt: None }
    }
}

#[derive(Debug, Clone)]
pub struct HjRun {
    pub field: HjField,
    pub report: FrontReport,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

fn crossed(t_prev: f64, t: f64, every: f64) -> bool {
    (t / every + 1e-9).floor() > (t_prev / every + 1e-9).floor()
}

/// Integrates to `t_final` and measures the front.
pub fn run(
    model: &HamiltonianModel,
    r: f64,
    constrained: bool,
    grid: XGrid,
    phi0: Vec<f64>,
    t_final: f64,
    opts: &HjOptions,
) -> Result<HjRun> {
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("final time must be positive, got {t_final}")));
    }
    let mut field = HjField::new(model.clone(), r, constrained, grid, phi0, opts.cfl)?;
    let steps = (t_final / field.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    field.dt = dt;
    let sample_dt = opts.sample_dt.unwrap_or(t_final / 500.0);

    let mut times = vec![0.0];
    let mut fronts = vec![field.front(opts.zero_tol)];
    let mut snapshots = Vec::new();
    if opts.snapshot_dt.is_some() {
        snapshots.push((0.0, field.phi.clone()));
    }
    for k in 1..=steps {
        let t_prev = field.time;
        field.step_by(dt)?;
        field.time = k as f64 * dt;
        if crossed(t_prev, field.time, sample_dt) || k == steps {
            times.push(field.time);
            fronts.push(field.front(opts.zero_tol));
        }
        if let Some(every) = opts.snapshot_dt {
            if crossed(t_prev, field.time, every) || k == steps {
                snapshots.push((field.time, field.phi.clone()));
            }
        }
    }

    let (times, front_positions): (Vec<f64>, Vec<f64>) =
        times.into_iter().zip(fronts).filter_map(|(t, f)| f.map(|x| (t, x))).unzip();
    let mut report = FrontReport { times, front_positions, fitted_speed: None, predicted_c_star: None, relative_error: None };
    report.fitted_speed = report.speed_after(0.5 * t_final);
    if r > 0.0 {
        report.predicted_c_star = min_wave_speed(model, r).ok().map(|s| s.c_star);
    }
    if let (Some(f), Some(c)) = (report.fitted_speed, report.predicted_c_star) {
        report.relative_error = Some((f - c).abs() / c);
    }
    Ok(HjRun { field, report, snapshots })
}

/// Point-cone data with slope `4 p*` and cap 50.
pub fn point_mass_data(model: &HamiltonianModel, r: f64, grid: &XGrid) -> Result<Vec<f64>> {
    let s = min_wave_speed(model, r)?;
    Ok(point_cone(grid, 4.0 * s.p_star, 50.0))
}

/// Sup-norm distance to the Hopf-Lax solution on `|x| <= 0.8 x_max`.
pub fn compare_hopf_lax(field: &HjField, model: &HamiltonianModel, r: f64) -> Result<f64> {
    let window = 0.8 * field.grid.x_max();
    let idx: Vec<usize> = (0..field.grid.n).filter(|&i| field.grid.x(i).abs() <= window + 1e-12).collect();
    let x: Vec<f64> = idx.iter().map(|&i| field.grid.x(i)).collect();
    let exact = hopf_lax_solution(model, r, field.time, &x)?;
    Ok(idx.iter().zip(&exact).map(|(&i, e)| (field.phi[i] - e).abs()).fold(0.0, f64::max))
}

/// Radially symmetric obstacle problem on the square `[-x_max, x_max]^2`,
/// differenced dimension by dimension. Returns the final field (row-major)
/// and the radius of the disc with the same area as the nullset.
pub fn run_2d(
    model: &HamiltonianModel,
    r: f64,
    x_max: f64,
    dx: f64,
    phi0: impl Fn(f64, f64) -> f64,
    t_final: f64,
    cfl: f64,
) -> Result<(Vec<f64>, f64)> {
    let grid = XGrid::symmetric(x_max, dx)?;
    let n = grid.n;
    let mut phi: Vec<f64> = (0..n * n).map(|k| phi0(grid.x(k % n), grid.x(k / n))).collect();
    let slope = (0..n * n)
        .map(|k| {
            let (i, j) = (k % n, k / n);
            let gx = if i + 1 < n { (phi[k + 1] - phi[k]).abs() } else { 0.0 };
            let gy = if j + 1 < n { (phi[k + n] - phi[k]).abs() } else { 0.0 };
            gx.max(gy) / dx
        })
        .fold(0.0, f64::max);
    let alpha = match model.lipschitz_bound() {
        Some(a) => a,
        None => model.effective_lipschitz(slope * std::f64::consts::SQRT_2)?,
    };
    if !(cfl > 0.0 && cfl <= MAX_CFL) {
        return Err(Error::Config(format!("cfl must lie in (0, {MAX_CFL}], got {cfl}")));
    }
    let steps = (t_final * 2.0 * alpha / (cfl * dx)).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    for _ in 0..steps {
        let prev = &phi;
        let next: Vec<f64> = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k % n, k / n);
                let c = prev[k];
                let w = if i == 0 { c } else { prev[k - 1] };
                let e = if i + 1 == n { c } else { prev[k + 1] };
                let s = if j == 0 { c } else { prev[k - n] };
                let nn = if j + 1 == n { c } else { prev[k + n] };
                let (ax, bx) = ((c - w) / dx, (e - c) / dx);
                let (ay, by) = ((c - s) / dx, (nn - c) / dx);
                let px = 0.5 * (ax + bx);
                let py = 0.5 * (ay + by);
                let flux = model.eval(px.hypot(py))? - 0.5 * alpha * (bx - ax) - 0.5 * alpha * (by - ay);
                Ok((c - dt * (flux + r)).max(0.0))
            })
            .collect::<Result<_>>()?;
        phi = next;
    }
    let zeros = phi.iter().filter(|p| **p < 1e-6).count();
    let radius = (zeros as f64 * dx * dx / std::f64::consts::PI).sqrt();
    Ok((phi, radius))
}
