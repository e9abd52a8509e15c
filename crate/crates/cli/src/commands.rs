use anyhow::{anyhow, bail, Result};
use clap::ValueEnum;
use kinfront::hamiltonian::{min_wave_speed, symmetric_grid, tabulate, HamiltonianModel};
use kinfront::hj::{self, compare_hopf_lax, point_cone, HjOptions, XGrid};
use kinfront::io::{self, fmt_num};
use kinfront::kinetic::{convergence_study, hj_reference, run_kinetic, KineticOptions, RegionOptions};
use kinfront::numerics::golden_section;
use kinfront::operators::{build_bgk, build_elliptic, build_kernel, DiscreteOperator};
use kinfront::spectral::convexity_defect;
use kinfront::unbounded::{
    kolmogorov_level_set, kolmogorov_mass, kolmogorov_phase, kolmogorov_phase_min, kolmogorov_residual,
    laplace_fourier_error, nonlocal_eigvec, spectral_nonexistence_probe, vfp_spectral, KolmogorovParams,
    NonlocalKernel, NonlocalOptions,
};
use kinfront::velocity::{uniform_equilibrium, VelocityGrid};

use crate::args::{EpsList, Init, KernelKind, KolmogorovCheck, Model, ModelArgs, NonlocalCheck, Rule};
use crate::output::Ctx;

fn name<T: ValueEnum>(x: &T) -> String {
    x.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
}

fn record_model(ctx: &mut Ctx, m: &ModelArgs) {
    ctx.param("model", name(&m.model));
    ctx.num("r", m.r);
    match m.model {
        Model::Quadratic => ctx.num("D", m.d),
        Model::Bgk => ctx.num("vmax", m.v_max),
        Model::Vfp => ctx.num("sigma", m.sigma),
        Model::Gaussian | Model::Laplace => {}
        Model::BgkSpectral | Model::Kernel | Model::Elliptic => {
            ctx.num("vmax", m.v_max);
            ctx.param("nv", m.nv);
            ctx.param("quadrature", name(&m.quadrature));
            ctx.num("dp", m.dp);
            if m.model == Model::Elliptic {
                ctx.num("D", m.d);
            }
            if let Some(path) = &m.kernel_file {
                let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                ctx.param("kernel_file", name);
            }
        }
    }
}

fn velocity_grid(m: &ModelArgs, n: usize) -> Result<VelocityGrid> {
    Ok(match m.quadrature {
        Rule::Midpoint => VelocityGrid::midpoint(m.v_max, n)?,
        Rule::Gauss => VelocityGrid::gauss_legendre(m.v_max, n)?,
    })
}

fn operator(m: &ModelArgs) -> Result<DiscreteOperator> {
    match m.model {
        Model::Bgk | Model::BgkSpectral => {
            let g = velocity_grid(m, m.nv)?;
            Ok(build_bgk(&g, &uniform_equilibrium(&g), m.r)?)
        }
        Model::Kernel => {
            let path = m.kernel_file.as_ref().ok_or_else(|| anyhow!("--model kernel needs --kernel-file"))?;
            let (n, k) = io::read_kernel_csv(path)?;
            let g = velocity_grid(m, n)?;
            Ok(build_kernel(&g, &k, m.r, &uniform_equilibrium(&g))?)
        }
        Model::Elliptic => {
            let g = velocity_grid(m, m.nv)?;
            Ok(build_elliptic(&g, &vec![m.d; m.nv], m.r, &uniform_equilibrium(&g))?)
        }
        other => bail!("model {other:?} has no velocity operator"),
    }
}

/// Closed forms directly; operator models tabulated over `|p| <= reach`.
fn hamiltonian_model(m: &ModelArgs, reach: f64) -> Result<HamiltonianModel> {
    Ok(match m.model {
        Model::Quadratic => HamiltonianModel::quadratic(m.d)?,
        Model::Bgk => HamiltonianModel::bgk_closed(m.v_max, m.r)?,
        Model::Vfp => HamiltonianModel::vfp(m.sigma)?,
        Model::Gaussian => HamiltonianModel::nonlocal_gaussian(),
        Model::Laplace => HamiltonianModel::nonlocal_laplace(),
        Model::BgkSpectral | Model::Kernel | Model::Elliptic => tabulate(&operator(m)?, &symmetric_grid(reach, m.dp))?,
    })
}

fn is_tabulated(m: &ModelArgs) -> bool {
    matches!(m.model, Model::BgkSpectral | Model::Kernel | Model::Elliptic)
}

pub fn hamiltonian(ctx: &mut Ctx, m: &ModelArgs, p_max: f64) -> Result<()> {
    record_model(ctx, m);
    ctx.num("p_max", p_max);
    if m.model == Model::Laplace && p_max >= 1.0 {
        bail!("the Laplace convolution Hamiltonian is finite only for |p| < 1");
    }
    let p = symmetric_grid(p_max, m.dp);
    let model = hamiltonian_model(m, p_max)?;
    let h: Vec<f64> = p.iter().map(|&x| model.eval(x)).collect::<kinfront::Result<_>>()?;
    io::write_hamiltonian(&ctx.file("hamiltonian.csv"), &ctx.meta(), &model, &p)?;
    let n = p.len();
    let even = (0..n).map(|i| (h[i] - h[n - 1 - i]).abs()).fold(0.0, f64::max);
    let lip = p.windows(2).zip(h.windows(2)).map(|(a, b)| ((b[1] - b[0]) / (a[1] - a[0])).abs()).fold(0.0, f64::max);
    ctx.report_num("h_at_zero", model.eval(0.0)?);
    ctx.report_num("evenness_defect", even);
    ctx.report_num("measured_lipschitz", lip);
    ctx.report_num("convexity_defect", convexity_defect(&p, &h).min(0.0));
    Ok(())
}

pub fn speed(ctx: &mut Ctx, m: &ModelArgs, p_max: f64) -> Result<()> {
    record_model(ctx, m);
    if is_tabulated(m) {
        ctx.num("p_max", p_max);
    }
    let model = hamiltonian_model(m, p_max)?;
    let s = min_wave_speed(&model, m.r)?;
    ctx.report_num("c_star", s.c_star);
    ctx.report_num("p_star", s.p_star);
    ctx.report("iterations", s.iterations);
    ctx.report("at_horizon", s.at_horizon);
    Ok(())
}

fn initial_phase(init: Init, grid: &XGrid, model: Option<&HamiltonianModel>, r: f64) -> Result<Vec<f64>> {
    Ok(match init {
        Init::Point => {
            let model = model.ok_or_else(|| anyhow!("point data needs a Hamiltonian"))?;
            if r <= 0.0 {
                bail!("point data needs r > 0 to fix the cone slope");
            }
            point_cone(grid, 4.0 * min_wave_speed(model, r)?.p_star, 50.0)
        }
        Init::Plateau => grid.points().iter().map(|x| (2.0 * (x.abs() - 0.5).max(0.0)).min(2.0)).collect(),
        Init::Bump => grid.points().iter().map(|x| (x * x).min(1.0)).collect(),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn hj(
    ctx: &mut Ctx,
    m: &ModelArgs,
    dx: f64,
    t_final: f64,
    cfl: f64,
    x_max: Option<f64>,
    init: Init,
    snapshot_every: Option<f64>,
    hopf_lax: bool,
    p_max: f64,
) -> Result<()> {
    record_model(ctx, m);
    let mut model = hamiltonian_model(m, p_max)?;
    let c_star = if m.r > 0.0 { Some(min_wave_speed(&model, m.r)?) } else { None };
    // slopes of the data must stay inside the table
    let slope = match (init, &c_star) {
        (Init::Point, Some(s)) => 4.0 * s.p_star,
        _ => 2.0,
    };
    if is_tabulated(m) && 1.05 * slope > p_max {
        model = hamiltonian_model(m, 1.05 * slope)?;
        ctx.num("p_max", 1.05 * slope);
    } else if is_tabulated(m) {
        ctx.num("p_max", p_max);
    }
    let x_max = x_max.unwrap_or_else(|| c_star.as_ref().map_or(4.0, |s| (1.5 * s.c_star * t_final).max(4.0)));
    let grid = XGrid::symmetric(x_max, dx)?;
    ctx.num("dx", dx);
    ctx.num("T", t_final);
    ctx.num("cfl", cfl);
    ctx.num("x_max", grid.x_max());
    ctx.param("init", name(&init));
    let phi0 = initial_phase(init, &grid, Some(&model), m.r)?;
    let every = snapshot_every.unwrap_or(t_final / 10.0);
    ctx.num("snapshot_every", every);
    let opts = HjOptions { cfl, snapshot_dt: Some(every), ..Default::default() };
    let run = hj::run(&model, m.r, m.r > 0.0, grid, phi0, t_final, &opts)?;
    io::write_front_report(&ctx.file("front.csv"), &ctx.meta(), &run.report)?;
    io::write_hj_snapshots(&ctx.file("snapshots.csv"), &ctx.meta(), &grid, &run.snapshots)?;
    ctx.report_opt("fitted_speed", run.report.fitted_speed);
    ctx.report_opt("predicted_c_star", run.report.predicted_c_star);
    ctx.report_opt("relative_error", run.report.relative_error);
    ctx.report_num("max_front_retreat", run.report.max_retreat());
    ctx.report_num("alpha", run.field.alpha);
    if hopf_lax {
        if init != Init::Point {
            bail!("the Hopf-Lax comparison needs point data");
        }
        ctx.report_num("hopf_lax_discrepancy", compare_hopf_lax(&run.field, &model, m.r)?);
    }
    Ok(())
}

fn kinetic_setup(ctx: &mut Ctx, m: &ModelArgs, dx: f64, t_final: f64, cfl: f64, x_max: f64, init: Init) -> Result<(DiscreteOperator, XGrid, Vec<f64>)> {
    record_model(ctx, m);
    let op = operator(m)?;
    let grid = XGrid::symmetric(x_max, dx)?;
    ctx.num("dx", dx);
    ctx.num("T", t_final);
    ctx.num("cfl", cfl);
    ctx.num("x_max", grid.x_max());
    ctx.param("init", name(&init));
    let model = if init == Init::Point { Some(tabulate(&op, &symmetric_grid(8.0, m.dp))?) } else { None };
    let phi0 = initial_phase(init, &grid, model.as_ref(), m.r)?;
    Ok((op, grid, phi0))
}

#[allow(clippy::too_many_arguments)]
pub fn kinetic(
    ctx: &mut Ctx,
    m: &ModelArgs,
    eps: f64,
    dx: f64,
    t_final: f64,
    cfl: f64,
    x_max: f64,
    init: Init,
    snapshot_every: Option<f64>,
) -> Result<()> {
    let (op, grid, phi0) = kinetic_setup(ctx, m, dx, t_final, cfl, x_max, init)?;
    ctx.num("eps", eps);
    let every = snapshot_every.unwrap_or(t_final / 4.0);
    ctx.num("snapshot_every", every);
    let opts = KineticOptions { cfl, snapshot_dt: Some(every), ..Default::default() };
    let run = run_kinetic(&op, eps, grid, &phi0, t_final, &opts)?;
    let path = ctx.file("kinetic_snapshots.csv");
    io::write_kinetic_snapshots(&path, &ctx.meta(), &grid, op.grid().nodes(), op.equilibrium().values(), eps, &run.snapshots)?;
    let b = &run.bounds;
    let rho = run.field.density();
    ctx.report_num("phi_max", b.phi_max);
    ctx.report_num("phi0_max", b.phi0_max);
    ctx.report_num("dt_phi_max", b.dt_phi_max);
    ctx.report_num("dt_phi_bound", b.dt_phi_bound);
    ctx.report("phase_upper_bound_holds", b.upper_holds(0.05));
    ctx.report("phase_time_bound_holds", b.time_derivative_holds(0.05));
    ctx.report("phase_time_bound_with_growth_holds", b.time_derivative_with_growth_holds(0.05));
    ctx.report_num("grad_v_final", b.grad_v.last().map_or(0.0, |g| g.1));
    ctx.report_num("rho_min", rho.iter().cloned().fold(f64::INFINITY, f64::min));
    ctx.report_num("rho_max", rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn converge(
    ctx: &mut Ctx,
    m: &ModelArgs,
    eps: &EpsList,
    dx: f64,
    t_final: f64,
    cfl: f64,
    x_max: f64,
    init: Init,
    margin: f64,
) -> Result<()> {
    let (op, grid, phi0) = kinetic_setup(ctx, m, dx, t_final, cfl, x_max, init)?;
    ctx.param("eps", eps.0.iter().map(|e| fmt_num(*e)).collect::<Vec<_>>().join(" "));
    ctx.num("margin", margin);
    let reference = hj_reference(&op, grid, &phi0, t_final, m.dp)?;
    let opts = KineticOptions { cfl, ..Default::default() };
    let regions = RegionOptions { margin: margin.max(0.0), ..Default::default() };
    let results = convergence_study(&op, &eps.0, grid, &phi0, t_final, &reference, &opts, &regions)?;

    io::write_hj_snapshots(&ctx.file("reference.csv"), &ctx.meta(), &grid, &[(t_final, reference.phi.clone())])?;
    for (k, res) in results.iter().enumerate() {
        let mut meta = ctx.meta();
        meta.push(("eps_run".into(), fmt_num(res.epsilon)));
        let path = ctx.file(&format!("phase_eps_{k}.csv"));
        let snap = [(t_final, res.run.field.f.clone())];
        io::write_kinetic_snapshots(&path, &meta, &grid, op.grid().nodes(), op.equilibrium().values(), res.epsilon, &snap)?;
    }
    let rows: Vec<_> = results
        .iter()
        .map(|r| (r.epsilon, r.gap, r.regions.min_rho_nullset, r.regions.max_f_over_m_positive))
        .collect();
    let monotone = results.windows(2).all(|w| w[1].gap < w[0].gap);
    let mut meta = ctx.meta();
    meta.push(("gap_strictly_decreasing".into(), monotone.to_string()));
    io::write_kinetic_summary(&ctx.file("summary.csv"), &meta, &rows)?;
    let bounds: Vec<Vec<Option<f64>>> = results
        .iter()
        .map(|r| {
            let b = &r.run.bounds;
            vec![Some(r.epsilon), Some(b.phi_max), Some(b.phi0_max), Some(b.dt_phi_max), Some(b.dt_phi_bound)]
        })
        .collect();
    io::write_table(&ctx.file("phase_bounds.csv"), &ctx.meta(), &["eps", "phi_max", "phi0_max", "dt_phi_max", "dt_phi_bound"], &bounds)?;
    for r in &results {
        println!(
            "eps={} gap={} min_rho_nullset={} max_f_positive={}",
            fmt_num(r.epsilon),
            fmt_num(r.gap),
            r.regions.min_rho_nullset.map(fmt_num).unwrap_or_default(),
            r.regions.max_f_over_m_positive.map(fmt_num).unwrap_or_default()
        );
    }
    println!("gap_strictly_decreasing={monotone}");
    Ok(())
}

/// `(name, value, tolerance, passed)` rows written to `checks.csv`.
struct Checks(Vec<(String, f64, f64, bool)>);

impl Checks {
    fn push(&mut self, name: String, value: f64, tol: f64, passed: bool) {
        println!("{name}: value={} tol={} {}", fmt_num(value), fmt_num(tol), if passed { "pass" } else { "FAIL" });
        self.0.push((name, value, tol, passed));
    }

    fn write(&self, ctx: &mut Ctx) -> Result<()> {
        let path = ctx.file("checks.csv");
        let mut buf = Vec::new();
        for (k, v) in ctx.meta() {
            buf.extend_from_slice(format!("# {k}={v}\n").as_bytes());
        }
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(["check", "value", "tolerance", "pass"])?;
            for (n, v, t, p) in &self.0 {
                w.write_record([n.clone(), fmt_num(*v), fmt_num(*t), p.to_string()])?;
            }
            w.flush()?;
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        let failed: Vec<&str> = self.0.iter().filter(|c| !c.3).map(|c| c.0.as_str()).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            bail!("checks failed: {}", failed.join(", "))
        }
    }
}

pub fn kolmogorov(ctx: &mut Ctx, sigma: f64, w: f64, check: KolmogorovCheck) -> Result<()> {
    ctx.num("sigma", sigma);
    ctx.num("w", w);
    ctx.param("check", name(&check));
    let params = KolmogorovParams::new(sigma, w)?;
    let want = |c: KolmogorovCheck| check == c || check == KolmogorovCheck::All;
    let mut checks = Checks(Vec::new());
    if want(KolmogorovCheck::Mass) {
        for t in [0.5, 1.0, 2.0] {
            let mass = kolmogorov_mass(&params, t, 1e-9)?;
            checks.push(format!("mass_t{t}"), (mass - 1.0).abs(), 1e-6, (mass - 1.0).abs() <= 1e-6);
        }
    }
    if want(KolmogorovCheck::Residual) {
        for (t, x, v) in [(1.0, 0.3, -0.2), (0.5, -0.1, 0.4), (2.0, 1.0, 0.5)] {
            let res = kolmogorov_residual(&params, t, x, v, 1e-4)?;
            checks.push(format!("residual_t{t}_x{x}_v{v}"), res, 1e-5, res <= 1e-5);
        }
    }
    if want(KolmogorovCheck::Phase) {
        let mut rows = Vec::new();
        for t in [1.0, 2.0] {
            for x in [0.0, 0.5, 2.0] {
                let (_, found, _) = golden_section(|v| kolmogorov_phase(sigma, t, x, v).unwrap_or(f64::INFINITY), -100.0, 100.0, 1e-12);
                let exact = kolmogorov_phase_min(sigma, t, x)?;
                checks.push(format!("phase_min_t{t}_x{x}"), (found - exact).abs(), 1e-8, (found - exact).abs() <= 1e-8);
            }
        }
        let (a, b) = (kolmogorov_level_set(sigma, 1.0, 1.0)?, kolmogorov_level_set(sigma, 2.0, 1.0)?);
        let ratio = b / a;
        checks.push("level_set_ratio_t2_over_t1".into(), (ratio - 2f64.powf(1.5)).abs(), 1e-12, (ratio - 2f64.powf(1.5)).abs() <= 1e-12);
        for k in 1..=40 {
            let t = 0.1 * k as f64;
            rows.push(vec![Some(t), Some(kolmogorov_level_set(sigma, t, 1.0)?)]);
        }
        io::write_table(&ctx.file("level_set.csv"), &ctx.meta(), &["t", "x_level"], &rows)?;
    }
    if want(KolmogorovCheck::Vfp) {
        for s in [sigma, 1.5 * sigma] {
            for p in [0.0, 2.0] {
                let half = s.powi(4) * p + 8.0 * s + 0.5;
                let n = (2.0 * half / 0.005).round() as usize + 1;
                let r = vfp_spectral(s, p, half, n)?;
                checks.push(format!("vfp_residual_sigma{s}_p{p}"), r.relative_residual, 1e-4, r.relative_residual <= 1e-4);
            }
        }
    }
    if want(KolmogorovCheck::Nonexistence) {
        let rep = spectral_nonexistence_probe(sigma, 1.0, &[4.0, 8.0, 16.0], 0.1)?;
        let rows: Vec<Vec<Option<f64>>> =
            rep.half_widths.iter().zip(&rep.eigenvalues).map(|(a, h)| vec![Some(*a), Some(*h)]).collect();
        io::write_table(&ctx.file("trend.csv"), &ctx.meta(), &["half_width", "eigenvalue"], &rows)?;
        let growth = rep.eigenvalues.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        checks.push("nonexistence_min_growth".into(), growth, 0.0, rep.increasing);
    }
    checks.write(ctx)?;
    checks.finish()
}

#[allow(clippy::too_many_arguments)]
pub fn nonlocal(
    ctx: &mut Ctx,
    kind: KernelKind,
    kernel_file: Option<&std::path::Path>,
    p: f64,
    check: NonlocalCheck,
    log2_n: u32,
    half_width: f64,
    edge_tol: f64,
    v_window: f64,
) -> Result<()> {
    ctx.param("kernel", name(&kind));
    ctx.num("p", p);
    ctx.param("check", name(&check));
    ctx.param("log2_n", log2_n);
    ctx.num("half_width", half_width);
    ctx.num("edge_tol", edge_tol);
    if !(2..=26).contains(&log2_n) {
        bail!("log2-n must lie in 2..=26");
    }
    let kernel = match kind {
        KernelKind::Gaussian => NonlocalKernel::Gaussian,
        KernelKind::Laplace => NonlocalKernel::Laplace,
        KernelKind::Custom => {
            let path = kernel_file.ok_or_else(|| anyhow!("--kernel custom needs --kernel-file"))?;
            let (_, _, rows) = io::read_table(path)?;
            let col = |i: usize| rows.iter().map(|r| r.get(i).copied().flatten().ok_or_else(|| anyhow!("incomplete kernel row"))).collect::<Result<Vec<f64>>>();
            NonlocalKernel::custom(col(0)?, col(1)?)?
        }
    };
    let opts = NonlocalOptions { n: 1 << log2_n, half_width, edge_tol, ..Default::default() };
    let e = nonlocal_eigvec(&kernel, p, &opts)?;
    let stride = ((0.01 / (2.0 * half_width / opts.n as f64)).ceil() as usize).max(1);
    let (v, q): (Vec<f64>, Vec<f64>) = e
        .v
        .iter()
        .zip(&e.q)
        .enumerate()
        .filter(|(j, (v, _))| v.abs() <= v_window && (j % stride == 0))
        .map(|(_, (v, q))| (*v, *q))
        .unzip();
    io::write_profile(&ctx.file("q_profile.csv"), &ctx.meta(), ["v", "Q"], &v, &q)?;
    ctx.report_num("H", e.h);
    ctx.report_num("min_q", e.min_q);
    ctx.report_num("mass", e.mass);
    ctx.report_num("max_imag", e.max_imag);
    ctx.write_summary()?;

    let want = |c: NonlocalCheck| check == c || check == NonlocalCheck::All;
    let mut checks = Checks(Vec::new());
    if want(NonlocalCheck::Positivity) {
        checks.push("min_q".into(), e.min_q, -1e-6, e.min_q >= -1e-6);
    }
    if want(NonlocalCheck::Normalization) {
        checks.push("mass_defect".into(), (e.mass - 1.0).abs(), 1e-6, (e.mass - 1.0).abs() <= 1e-6);
    }
    if want(NonlocalCheck::Fourier) && kind == KernelKind::Laplace {
        let worst = laplace_fourier_error(&e);
        checks.push("fourier_error".into(), worst, 1e-8, worst <= 1e-8);
    }
    checks.write(ctx)?;
    checks.finish()
}
