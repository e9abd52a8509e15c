//! Finite-`eps` kinetic solver in the hyperbolic scaling
//!
//! `f_t + v f_x = (L f + r rho (M - f)) / eps`,
//!
//! with first-order splitting: upwind transport, then an implicit relaxation
//! per space node. The WKB phase `-eps ln(f / M)` is extracted afterwards.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::hamiltonian::{symmetric_grid, tabulate};
use crate::hj::{self, max_gradient, HjField, HjOptions, XGrid};
use crate::operators::DiscreteOperator;

/// Values of `f` below this are clamped before taking the logarithm.
pub const PHASE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Ghost cells copy the boundary value.
    Outflow,
    Periodic,
}

#[derive(Debug, Clone)]
pub struct KineticField {
    pub grid: XGrid,
    pub op: DiscreteOperator,
    /// `nx * nv` values, row-major in `x`.
    pub f: Vec<f64>,
    pub epsilon: f64,
    pub time: f64,
    pub dt: f64,
    pub boundary: Boundary,
}

impl KineticField {
    pub fn new(op: DiscreteOperator, epsilon: f64, grid: XGrid, f0: Vec<f64>, cfl: f64, boundary: Boundary) -> Result<Self> {
        check_len(grid.n * op.len(), f0.len())?;
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        let v_max = op.grid().nodes().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let dt = cfl * grid.dx / v_max;
        Ok(Self { grid, op, f: f0, epsilon, time: 0.0, dt, boundary })
    }

    /// Well-prepared data `M(v) exp(-phi0(x) / eps)`.
    pub fn well_prepared(op: DiscreteOperator, epsilon: f64, grid: XGrid, phi0: &[f64], cfl: f64, boundary: Boundary) -> Result<Self> {
        check_len(grid.n, phi0.len())?;
        if phi0.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("initial phase must be nonnegative".into()));
        }
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        let m = op.equilibrium().values().to_vec();
        let f0 = phi0.iter().flat_map(|p| m.iter().map(move |mj| mj * (-p / epsilon).exp())).collect();
        Self::new(op, epsilon, grid, f0, cfl, boundary)
    }

    pub fn nv(&self) -> usize {
        self.op.len()
    }

    pub fn density(&self) -> Vec<f64> {
        let g = self.op.grid();
        self.f.chunks(self.nv()).map(|row| g.integrate(row)).collect()
    }

    /// `sum_x dx sum_v w f`.
    pub fn total_mass(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.grid.dx
    }

    pub fn step(&mut self) -> Result<()> {
        self.step_by(self.dt)
    }

    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        let transported = self.transport(dt)?;
        self.f = self.relax(transported, dt)?;
        self.time += dt;
        Ok(())
    }

    fn transport(&self, dt: f64) -> Result<Vec<f64>> {
        let (nx, nv) = (self.grid.n, self.nv());
        let v = self.op.grid().nodes();
        let courant: Vec<f64> = v.iter().map(|vj| vj * dt / self.grid.dx).collect();
        if let Some(c) = courant.iter().find(|c| c.abs() > 1.0 + 1e-12) {
            return Err(Error::Cfl { ratio: c.abs(), limit: 1.0 });
        }
        let f = &self.f;
        let periodic = self.boundary == Boundary::Periodic;
        let mut out = vec![0.0; nx * nv];
        out.par_chunks_mut(nv).enumerate().for_each(|(i, row)| {
            let left = if i > 0 { i - 1 } else if periodic { nx - 1 } else { 0 };
            let right = if i + 1 < nx { i + 1 } else if periodic { 0 } else { nx - 1 };
            for j in 0..nv {
                let c = courant[j];
                let here = f[i * nv + j];
                row[j] = if c >= 0.0 {
                    here - c * (here - f[left * nv + j])
                } else {
                    here - c * (f[right * nv + j] - here)
                };
            }
        });
        Ok(out)
    }

    // (I - k (L - r rho I)) f_new = f_old + k r rho M, k = dt / eps, then once
    // more with rho taken from the first solution.
    fn relax(&self, old: Vec<f64>, dt: f64) -> Result<Vec<f64>> {
        let nv = self.nv();
        let k = dt / self.epsilon;
        let r = self.op.growth_rate();
        let grid = self.op.grid();
        let m = self.op.equilibrium().values();
        let kl = self.op.matrix_l() * k;
        let eps = self.epsilon;
        let solve = |node: usize, f_old: &[f64], rho: f64| -> Result<Vec<f64>> {
            let mut a = -&kl;
            for j in 0..nv {
                a[(j, j)] += 1.0 + k * r * rho;
            }
            let b = DVector::from_iterator(nv, (0..nv).map(|j| f_old[j] + k * r * rho * m[j]));
            let lu = a.lu();
            lu.solve(&b).map(|x| x.as_slice().to_vec()).ok_or(Error::Singular { node, eps, dt })
        };
        let mut out = vec![0.0; old.len()];
        out.par_chunks_mut(nv)
            .zip(old.par_chunks(nv))
            .enumerate()
            .try_for_each(|(i, (row, f_old))| -> Result<()> {
                let rho0 = grid.integrate(f_old);
                let first = solve(i, f_old, rho0)?;
                let second = if r != 0.0 { solve(i, f_old, grid.integrate(&first))? } else { first };
                row.copy_from_slice(&second);
                Ok(())
            })?;
        Ok(out)
    }

    /// Errors if `0 <= f <= M` is violated by more than `tol`.
    pub fn check_bounds(&self, tol: f64) -> Result<()> {
        let nv = self.nv();
        let m = self.op.equilibrium().values();
        for (idx, &fij) in self.f.iter().enumerate() {
            let j = idx % nv;
            let excess = (-fij).max(fij - m[j]);
            if excess > tol || !fij.is_finite() {
                return Err(Error::Bound { node: idx / nv, velocity_node: j, time: self.time, excess });
            }
        }
        Ok(())
    }
}

/// `phi = -eps ln(f / M)` with `clamped` marking entries at or below the floor.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub nx: usize,
    pub nv: usize,
    pub phi: Vec<f64>,
    pub clamped: Vec<bool>,
}

impl PhaseField {
    pub fn from_field(field: &KineticField) -> Self {
        let nv = field.nv();
        let m = field.op.equilibrium().values();
        let eps = field.epsilon;
        let (phi, clamped) = field
            .f
            .iter()
            .enumerate()
            .map(|(idx, &fij)| {
                let low = !(fij > PHASE_FLOOR);
                (-eps * (fij.max(PHASE_FLOOR) / m[idx % nv]).ln(), low)
            })
            .unzip();
        Self { nx: field.grid.n, nv, phi, clamped }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.phi[i * self.nv + j]
    }
}

/// Measured counterparts of the phase estimates.
#[derive(Debug, Clone, Default)]
pub struct PhaseBounds {
    pub phi0_max: f64,
    pub phi_max: f64,
    pub phi_min: f64,
    /// Largest `|phi^{n+1} - phi^n| / dt` over unclamped entries.
    pub dt_phi_max: f64,
    /// `v_max * max |phi0'|`.
    pub dt_phi_bound: f64,
    pub growth_rate: f64,
    /// `(t, max |d_v phi|)` after every step.
    pub grad_v: Vec<(f64, f64)>,
}

impl PhaseBounds {
    /// `0 <= phi <= max phi0`, with relative slack.
    pub fn upper_holds(&self, slack: f64) -> bool {
        self.phi_max <= self.phi0_max * (1.0 + slack) + 1e-12 && self.phi_min >= -slack * self.phi0_max - 1e-12
    }

    /// `|phi_t| <= v_max max |phi0'|`, with relative slack.
    pub fn time_derivative_holds(&self, slack: f64) -> bool {
        self.dt_phi_max <= self.dt_phi_bound * (1.0 + slack)
    }

    /// The same bound with the reaction rate added. At `t = 0`, well-prepared
    /// data give `phi_t = -v phi0' - r (1 - exp(-phi0 / eps))`, so for `r > 0`
    /// this is the sharp form.
    pub fn time_derivative_with_growth_holds(&self, slack: f64) -> bool {
        self.dt_phi_max <= (self.dt_phi_bound + self.growth_rate) * (1.0 + slack)
    }
}

fn grad_v_max(phase: &PhaseField, v: &[f64]) -> f64 {
    let mut g = 0.0f64;
    for i in 0..phase.nx {
        for j in 0..phase.nv - 1 {
            let (a, b) = (i * phase.nv + j, i * phase.nv + j + 1);
            if !phase.clamped[a] && !phase.clamped[b] {
                g = g.max(((phase.phi[b] - phase.phi[a]) / (v[j + 1] - v[j])).abs());
            }
        }
    }
    g
}

#[derive(Debug, Clone, Copy)]
pub struct KineticOptions {
    pub cfl: f64,
    pub boundary: Boundary,
    /// Tolerance of the per-step `0 <= f <= M` check.
    pub bound_tol: f64,
    pub snapshot_dt: Option<f64>,
}

impl Default for KineticOptions {
    fn default() -> Self {
        Self { cfl: 0.9, boundary: Boundary::Outflow, bound_tol: 1e-10, snapshot_dt: None }
    }
}

#[derive(Debug, Clone)]
pub struct KineticRun {
    pub field: KineticField,
    pub phase: PhaseField,
    pub bounds: PhaseBounds,
    /// `(t, f)` pairs.
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

/// Runs from well-prepared data to `t_final`, checking the sandwich bound
/// after every step and tracking the phase estimates.
pub fn run_kinetic(
    op: &DiscreteOperator,
    epsilon: f64,
    grid: XGrid,
    phi0: &[f64],
    t_final: f64,
    opts: &KineticOptions,
) -> Result<KineticRun> {
    if !(t_final > 0.0) {
        return Err(Error::Config(format!("final time must be positive, got {t_final}")));
    }
    let mut field = KineticField::well_prepared(op.clone(), epsilon, grid, phi0, opts.cfl, opts.boundary)?;
    field.check_bounds(opts.bound_tol)?;
    let steps = (t_final / field.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = t_final / steps as f64;
    field.dt = dt;

    let v = op.grid().nodes().to_vec();
    let v_max = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut phase = PhaseField::from_field(&field);
    let mut bounds = PhaseBounds {
        phi0_max: phi0.iter().cloned().fold(0.0, f64::max),
        phi_max: f64::NEG_INFINITY,
        phi_min: f64::INFINITY,
        dt_phi_bound: v_max * max_gradient(phi0, grid.dx),
        growth_rate: op.growth_rate(),
        ..Default::default()
    };
    let mut snapshots = Vec::new();
    if opts.snapshot_dt.is_some() {
        snapshots.push((0.0, field.f.clone()));
    }
    for k in 1..=steps {
        field.step_by(dt)?;
        field.time = k as f64 * dt;
        field.check_bounds(opts.bound_tol)?;
        let next = PhaseField::from_field(&field);
        for idx in 0..next.phi.len() {
            if next.clamped[idx] {
                continue;
            }
            bounds.phi_max = bounds.phi_max.max(next.phi[idx]);
            bounds.phi_min = bounds.phi_min.min(next.phi[idx]);
            if !phase.clamped[idx] {
                bounds.dt_phi_max = bounds.dt_phi_max.max((next.phi[idx] - phase.phi[idx]).abs() / dt);
            }
        }
        bounds.grad_v.push((field.time, grad_v_max(&next, &v)));
        phase = next;
        if let Some(every) = opts.snapshot_dt {
            let prev = (k - 1) as f64 * dt;
            if (field.time / every + 1e-9).floor() > (prev / every + 1e-9).floor() || k == steps {
                snapshots.push((field.time, field.f.clone()));
            }
        }
    }
    Ok(KineticRun { field, phase, bounds, snapshots })
}

/// Limit problem for `op`: the spectral Hamiltonian is tabulated over
/// `|p| <= 1.05 max|phi0'|` and the (obstacle, if `r > 0`) equation is run on
/// the same grid.
pub fn hj_reference(op: &DiscreteOperator, grid: XGrid, phi0: &[f64], t_final: f64, dp: f64) -> Result<HjField> {
    let reach = (1.05 * max_gradient(phi0, grid.dx)).max(dp * 4.0);
    let model = tabulate(op, &symmetric_grid(reach, dp))?;
    let r = op.growth_rate();
    let run = hj::run(&model, r, r > 0.0, grid, phi0.to_vec(), t_final, &HjOptions::default())?;
    Ok(run.field)
}

fn interpolate(reference: &HjField, x: f64) -> f64 {
    let g = &reference.grid;
    let s = ((x - g.x_min) / g.dx).clamp(0.0, (g.n - 1) as f64);
    let i = (s.floor() as usize).min(g.n - 2);
    let t = s - i as f64;
    (1.0 - t) * reference.phi[i] + t * reference.phi[i + 1]
}

/// `max |phi^eps - phi^0|` over `|x| <= 0.7 x_max` and all velocities,
/// skipping clamped entries.
pub fn phase_gap(phase: &PhaseField, grid: &XGrid, reference: &HjField) -> f64 {
    let window = 0.7 * grid.x_max();
    let mut gap = 0.0f64;
    for i in 0..grid.n {
        let x = grid.x(i);
        if x.abs() > window + 1e-12 {
            continue;
        }
        let phi0 = interpolate(reference, x);
        for j in 0..phase.nv {
            let idx = i * phase.nv + j;
            if !phase.clamped[idx] {
                gap = gap.max((phase.phi[idx] - phi0).abs());
            }
        }
    }
    gap
}

#[derive(Debug, Clone, Copy)]
pub struct RegionOptions {
    pub zero_tol: f64,
    pub pos_tol: f64,
    /// Nullset nodes closer than this to a point with `phi0 >= zero_tol` are
    /// dropped, keeping a compact subset of the interior.
    pub margin: f64,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self { zero_tol: 1e-6, pos_tol: 0.1, margin: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionReport {
    /// `None` when the region is empty or `r = 0`.
    pub min_rho_nullset: Option<f64>,
    pub max_f_over_m_positive: Option<f64>,
}

pub fn region_diagnostics(field: &KineticField, reference: &HjField, opts: &RegionOptions) -> RegionReport {
    let grid = &field.grid;
    let phi0: Vec<f64> = (0..grid.n).map(|i| interpolate(reference, grid.x(i))).collect();
    let rho = field.density();
    let reach = (opts.margin / grid.dx).round() as usize;
    let mut min_rho: Option<f64> = None;
    if field.op.growth_rate() > 0.0 {
        for i in 0..grid.n {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(grid.n - 1);
            let interior = (i >= reach && i + reach < grid.n || reach == 0) && (lo..=hi).all(|k| phi0[k] < opts.zero_tol);
            if interior {
                min_rho = Some(min_rho.map_or(rho[i], |m: f64| m.min(rho[i])));
            }
        }
    }
    let nv = field.nv();
    let m = field.op.equilibrium().values();
    let mut max_f: Option<f64> = None;
    for i in (0..grid.n).filter(|&i| phi0[i] > opts.pos_tol) {
        for j in 0..nv {
            let q = field.f[i * nv + j] / m[j];
            max_f = Some(max_f.map_or(q, |a: f64| a.max(q)));
        }
    }
    RegionReport { min_rho_nullset: min_rho, max_f_over_m_positive: max_f }
}

#[derive(Debug, Clone)]
pub struct EpsilonResult {
    pub epsilon: f64,
    pub gap: f64,
    pub regions: RegionReport,
    pub run: KineticRun,
}

/// Runs every `eps` in parallel and measures the gap to `reference`.
pub fn convergence_study(
    op: &DiscreteOperator,
    eps_list: &[f64],
    grid: XGrid,
    phi0: &[f64],
    t_final: f64,
    reference: &HjField,
    opts: &KineticOptions,
    regions: &RegionOptions,
) -> Result<Vec<EpsilonResult>> {
    eps_list
        .par_iter()
        .map(|&epsilon| {
            let run = run_kinetic(op, epsilon, grid, phi0, t_final, opts)?;
            let gap = phase_gap(&run.phase, &grid, reference);
            let regions = region_diagnostics(&run.field, reference, regions);
            Ok(EpsilonResult { epsilon, gap, regions, run })
        })
        .collect()
}

/// `1 - k (L - r rho)` is exposed for tests of the relaxation matrix.
#[cfg(test)]
fn relaxation_matrix(op: &DiscreteOperator, k: f64, rho: f64) -> nalgebra::DMatrix<f64> {
    let mut a = -(op.matrix_l() * k);
    for j in 0..op.len() {
        a[(j, j)] += 1.0 + k * op.growth_rate() * rho;
    }
    a
}
