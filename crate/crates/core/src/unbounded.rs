//! Models with unbounded velocities: the Kolmogorov fundamental solution,
//! the velocity Fokker-Planck eigenpair, and convolution (nonlocal)
//! Hamiltonians with their Fourier-reconstructed eigenvectors.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::numerics::integrate_adaptive;
use crate::operators::build_elliptic;
use crate::spectral::solve_direct;
use crate::velocity::{make_grid, uniform_equilibrium};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KolmogorovParams {
    pub sigma: f64,
    /// Initial velocity.
    pub w: f64,
}

impl KolmogorovParams {
    pub fn new(sigma: f64, w: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma, w })
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("time must be positive, got {t}")))
    }
}

/// Fundamental solution of `f_t + v f_x = sigma f_vv` started from
/// `delta(x) delta(v - w)`, in one dimension.
pub fn kolmogorov_density(params: &KolmogorovParams, t: f64, x: f64, v: f64) -> Result<f64> {
    check_time(t)?;
    let s = params.sigma;
    let dv = v - params.w;
    let dx = 2.0 * x - (v + params.w) * t;
    let expo = (dv * dv * t * t + 3.0 * dx * dx) / (4.0 * s * t.powi(3));
    Ok(3f64.sqrt() / (2.0 * std::f64::consts::PI * s * t * t) * (-expo).exp())
}

/// `iint f dx dv` by nested adaptive quadrature on an 8-standard-deviation
/// window. Given `v`, `x` is normal with mean `(v + w) t / 2` and variance
/// `sigma t^3 / 6`; `v` itself has variance `2 sigma t`.
pub fn kolmogorov_mass(params: &KolmogorovParams, t: f64, tol: f64) -> Result<f64> {
    check_time(t)?;
    let sd_v = (2.0 * params.sigma * t).sqrt();
    let sd_x = (params.sigma * t.powi(3) / 6.0).sqrt();
    let outer = |v: f64| {
        let mean = 0.5 * (v + params.w) * t;
        integrate_adaptive(
            |x| kolmogorov_density(params, t, x, v).unwrap_or(0.0),
            mean - 8.0 * sd_x,
            mean + 8.0 * sd_x,
            tol * 1e-2,
        )
    };
    Ok(integrate_adaptive(outer, params.w - 8.0 * sd_v, params.w + 8.0 * sd_v, tol))
}

/// `|f_t + v f_x - sigma f_vv|` with centered differences of step `h`.
pub fn kolmogorov_residual(params: &KolmogorovParams, t: f64, x: f64, v: f64, h: f64) -> Result<f64> {
    check_time(t - h)?;
    let f = |t: f64, x: f64, v: f64| kolmogorov_density(params, t, x, v);
    let ft = (f(t + h, x, v)? - f(t - h, x, v)?) / (2.0 * h);
    let fx = (f(t, x + h, v)? - f(t, x - h, v)?) / (2.0 * h);
    let fvv = (f(t, x, v + h)? - 2.0 * f(t, x, v)? + f(t, x, v - h)?) / (h * h);
    Ok((ft + v * fx - params.sigma * fvv).abs())
}

/// `(v^2 t^2 + 3 (2x - v t)^2) / (4 sigma t^3)`.
pub fn kolmogorov_phase(sigma: f64, t: f64, x: f64, v: f64) -> Result<f64> {
    check_time(t)?;
    let a = 2.0 * x - v * t;
    Ok((v * v * t * t + 3.0 * a * a) / (4.0 * sigma * t.powi(3)))
}

/// Minimum over `v` of the phase, attained at `v = 3x / (2t)`.
pub fn kolmogorov_phase_min(sigma: f64, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(3.0 * x * x / (4.0 * sigma * t.powi(3)))
}

/// Where the minimal phase equals `level`: `x = sqrt(4 sigma t^3 level / 3)`,
/// so level sets spread like `t^{3/2}`.
pub fn kolmogorov_level_set(sigma: f64, t: f64, level: f64) -> Result<f64> {
    check_time(t)?;
    Ok((4.0 * sigma * t.powi(3) * level / 3.0).sqrt())
}

#[derive(Debug, Clone)]
pub struct VfpResult {
    pub h: f64,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    /// Eigen-residual on the inner 80%, relative to the largest term.
    pub relative_residual: f64,
}

/// Closed-form eigenpair of `(Q' + v Q / sigma^2)' + v p Q = H Q`:
/// `H = sigma^4 p^2` and a Gaussian of mean `sigma^4 p`, variance `sigma^2`.
/// The residual is measured with centered differences on `n` points.
pub fn vfp_spectral(sigma: f64, p: f64, half_width: f64, n: usize) -> Result<VfpResult> {
    if !(sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let mean = sigma.powi(4) * p;
    let need = mean.abs() + 8.0 * sigma;
    if half_width < need {
        return Err(Error::Config(format!("truncation half-width {half_width} is below {need}")));
    }
    if n < 5 {
        return Err(Error::Config("vfp grid needs at least 5 points".into()));
    }
    let h = sigma.powi(4) * p * p;
    let dv = 2.0 * half_width / (n - 1) as f64;
    let v: Vec<f64> = (0..n).map(|i| -half_width + i as f64 * dv).collect();
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let q: Vec<f64> = v.iter().map(|vi| norm * (-(vi - mean).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s2 = sigma * sigma;
    let margin = n / 10;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for i in margin.max(1)..(n - margin).min(n - 1) {
        let d1 = (q[i + 1] - q[i - 1]) / (2.0 * dv);
        let d2 = (q[i + 1] - 2.0 * q[i] + q[i - 1]) / (dv * dv);
        let terms = [d2, q[i] / s2, v[i] * d1 / s2, v[i] * p * q[i], -h * q[i]];
        worst = worst.max(terms.iter().sum::<f64>().abs());
        scale = scale.max(terms.iter().map(|x| x.abs()).sum::<f64>());
    }
    Ok(VfpResult { h, v, q, relative_residual: worst / scale })
}

/// Probability kernel of a convolution operator.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlocalKernel {
    /// Standard normal density.
    Gaussian,
    /// `exp(-|x|) / 2`.
    Laplace,
    /// Samples on a uniform symmetric grid.
    Custom { x: Vec<f64>, k: Vec<f64> },
}

impl NonlocalKernel {
    pub fn custom(x: Vec<f64>, k: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || k.len() != n {
            return Err(Error::Config("custom kernel needs matching x and K with 3 or more samples".into()));
        }
        let dx = x[1] - x[0];
        if (0..n).any(|i| (x[i] + x[n - 1 - i]).abs() > 1e-12 * dx.max(1.0))
            || x.windows(2).any(|w| ((w[1] - w[0]) - dx).abs() > 1e-9 * dx)
        {
            return Err(Error::Config("custom kernel grid must be uniform and symmetric".into()));
        }
        if k.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("kernel must be nonnegative".into()));
        }
        let kernel = Self::Custom { x, k };
        let mass = kernel.moment(0.0);
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Config(format!("kernel integrates to {mass}, expected 1")));
        }
        Ok(kernel)
    }

    /// Open interval of `p` on which `int K e^{px}` is finite.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Self::Laplace => (-1.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    // trapezoid on the samples
    fn moment(&self, p: f64) -> f64 {
        match self {
            Self::Custom { x, k } => {
                let dx = x[1] - x[0];
                let n = x.len();
                let inner: f64 = (1..n - 1).map(|i| k[i] * (p * x[i]).exp()).sum();
                dx * (inner + 0.5 * (k[0] * (p * x[0]).exp() + k[n - 1] * (p * x[n - 1]).exp()))
            }
            Self::Gaussian => (0.5 * p * p).exp(),
            Self::Laplace => 1.0 / (1.0 - p * p),
        }
    }

    /// `int K(x) e^{-i xi x} dx` for real `xi`.
    pub fn transform(&self, xi: f64) -> Complex64 {
        match self {
            Self::Gaussian => Complex64::new((-0.5 * xi * xi).exp(), 0.0),
            Self::Laplace => Complex64::new(1.0 / (1.0 + xi * xi), 0.0),
            Self::Custom { x, k } => {
                let dx = x[1] - x[0];
                let n = x.len();
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    acc += Complex64::from_polar(w * k[i], -xi * x[i]);
                }
                acc * dx
            }
        }
    }
}

/// `H(p) = int K(x) e^{px} dx - 1`.
pub fn convolution_hamiltonian(kernel: &NonlocalKernel, p: f64) -> Result<f64> {
    let (lo, hi) = kernel.domain();
    if !(p > lo && p < hi) {
        return Err(Error::Domain { p });
    }
    Ok(kernel.moment(p) - 1.0)
}

#[derive(Debug, Clone, Copy)]
pub struct NonlocalOptions {
    /// FFT length, a multiple of 4.
    pub n: usize,
    /// Velocity half-width; the frequency step is `pi / half_width`.
    pub half_width: f64,
    /// Smallest trapezoid step of the line integral; steps grow like `h0 |xi|`.
    pub h0: f64,
    /// Largest admissible `|F(Q_p)|` at the frequency cutoff.
    pub edge_tol: f64,
    pub realness_tol: f64,
}

impl Default for NonlocalOptions {
    fn default() -> Self {
        Self { n: 1 << 19, half_width: 24.0, h0: 1e-5, edge_tol: 1e-4, realness_tol: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct NonlocalEigvec {
    pub p: f64,
    pub h: f64,
    /// Frequencies `(m - n/2) d_xi`.
    pub xi: Vec<f64>,
    pub transform: Vec<Complex64>,
    pub v: Vec<f64>,
    /// Real part of the reconstruction.
    pub q: Vec<f64>,
    pub min_q: f64,
    pub max_imag: f64,
    /// `sum dv Q`.
    pub mass: f64,
}

impl NonlocalEigvec {
    /// Returns `(v, Q)` restricted to `|v| <= v_max`.
    pub fn window(&self, v_max: f64) -> (Vec<f64>, Vec<f64>) {
        self.v.iter().zip(&self.q).filter(|(v, _)| v.abs() <= v_max).map(|(v, q)| (*v, *q)).unzip()
    }
}

// int_a^b g by the composite trapezoid rule with at most `step` spacing.
fn trapezoid(g: &impl Fn(f64) -> Complex64, a: f64, b: f64, step: f64) -> Complex64 {
    let k = ((b - a).abs() / step).ceil().max(1.0) as usize;
    let h = (b - a) / k as f64;
    let mut acc = 0.5 * (g(a) + g(b));
    for i in 1..k {
        acc += g(a + i as f64 * h);
    }
    acc * h
}

/// Eigenvector of the convolution operator, reconstructed from
/// `F(Q_p)(xi) = exp(int_0^xi (K^(s) - K^(ip)) / (s - ip) ds)` by discrete
/// Fourier synthesis.
pub fn nonlocal_eigvec(kernel: &NonlocalKernel, p: f64, opts: &NonlocalOptions) -> Result<NonlocalEigvec> {
    let h = convolution_hamiltonian(kernel, p)?;
    let n = opts.n;
    if n < 16 || n % 4 != 0 {
        return Err(Error::Config(format!("fft length must be a multiple of 4, got {n}")));
    }
    let dv = 2.0 * opts.half_width / n as f64;
    let dxi = std::f64::consts::PI / opts.half_width;
    let half = n / 2;
    let k_ip = Complex64::new(kernel.moment(p), 0.0);
    let ip = Complex64::new(0.0, p);
    let integrand = |s: f64| -> Complex64 {
        if p == 0.0 && s.abs() < 1e-6 {
            // removable: the limit is K^'(0), taken by a centered difference
            let d = 1e-4;
            (kernel.transform(d) - kernel.transform(-d)) / (2.0 * d)
        } else {
            (kernel.transform(s) - k_ip) / (Complex64::new(s, 0.0) - ip)
        }
    };
    // cell integrals over [m dxi, (m+1) dxi] on both sides of zero, in parallel
    let cells = |sign: f64| -> Vec<Complex64> {
        (0..half)
            .into_par_iter()
            .map(|m| {
                let a = sign * m as f64 * dxi;
                let b = sign * (m + 1) as f64 * dxi;
                let step = opts.h0 * (m as f64 * dxi).max(1.0);
                trapezoid(&integrand, a, b, step)
            })
            .collect()
    };
    let pos = cells(1.0);
    let neg = cells(-1.0);
    let mut log_f = vec![Complex64::new(0.0, 0.0); n + 1];
    // index m <-> xi = (m - half) dxi, m = 0..=n
    for m in 0..half {
        log_f[half + m + 1] = log_f[half + m] + pos[m];
        log_f[half - m - 1] = log_f[half - m] + neg[m];
    }
    let f_full: Vec<Complex64> = log_f.iter().map(|l| l.exp()).collect();
    let edge = f_full[0].norm().max(f_full[n].norm());
    if edge > opts.edge_tol {
        return Err(Error::Resolution(format!(
            "|F(Q_p)| is {edge:e} at the cutoff {:.3e}, above {:e}",
            half as f64 * dxi,
            opts.edge_tol
        )));
    }
    let mut transform: Vec<Complex64> = f_full[..n].to_vec();
    // the bin at -Xi stands for both ends of the band
    transform[0] = 0.5 * (f_full[0] + f_full[n]);

    let mut buf: Vec<Complex64> =
        transform.iter().enumerate().map(|(m, f)| if m % 2 == 0 { *f } else { -*f }).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = dxi / (2.0 * std::f64::consts::PI);
    let values: Vec<Complex64> =
        buf.iter().enumerate().map(|(j, z)| if j % 2 == 0 { *z * scale } else { -*z * scale }).collect();
    let max_imag = values.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if max_imag > opts.realness_tol {
        return Err(Error::Inconsistent(format!("reconstruction has imaginary part {max_imag:e}")));
    }
    let q: Vec<f64> = values.iter().map(|z| z.re).collect();
    let v: Vec<f64> = (0..n).map(|j| (j as f64 - half as f64) * dv).collect();
    let min_q = q.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass = q.iter().sum::<f64>() * dv;
    let xi = (0..n).map(|m| (m as f64 - half as f64) * dxi).collect();
    Ok(NonlocalEigvec { p, h, xi, transform, v, q, min_q, max_imag, mass })
}

/// Closed form for the Laplace kernel:
/// `(1 + xi^2)^{-1 / (2 (1 - p^2))} exp(-i p atan(xi) / (1 - p^2))`.
pub fn laplace_transform_closed_form(p: f64, xi: f64) -> Complex64 {
    let a = 1.0 / (1.0 - p * p);
    Complex64::from_polar((1.0 + xi * xi).powf(-0.5 * a), -p * a * xi.atan())
}

/// Largest distance of a Laplace-kernel reconstruction to the closed form.
/// The first bin holds the average over both ends of the band, so it is
/// compared with the averaged closed form.
pub fn laplace_fourier_error(e: &NonlocalEigvec) -> f64 {
    e.xi.iter()
        .zip(&e.transform)
        .enumerate()
        .map(|(m, (xi, f))| {
            let exact = if m == 0 {
                0.5 * (laplace_transform_closed_form(e.p, *xi) + laplace_transform_closed_form(e.p, -xi))
            } else {
                laplace_transform_closed_form(e.p, *xi)
            };
            (f - exact).norm()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub sigma: f64,
    pub p: f64,
    pub half_widths: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// True when the eigenvalue grows strictly with the half-width.
    pub increasing: bool,
}

/// Principal eigenvalue of `sigma d_vv + v p` with Neumann conditions on
/// `[-a, a]` for each half-width `a`, at velocity step close to `dv`. No
/// limiting value is reported: for `p != 0` there is none.
pub fn spectral_nonexistence_probe(sigma: f64, p: f64, half_widths: &[f64], dv: f64) -> Result<ProbeReport> {
    if !(sigma > 0.0) || !(dv > 0.0) {
        return Err(Error::Config("sigma and dv must be positive".into()));
    }
    let eigenvalues: Vec<f64> = half_widths
        .iter()
        .map(|&a| {
            let n = ((2.0 * a / dv).round() as usize).max(3);
            let g = make_grid(a, n)?;
            let op = build_elliptic(&g, &vec![sigma; n], 0.0, &uniform_equilibrium(&g))?;
            Ok(solve_direct(&op, p)?.h_value)
        })
        .collect::<Result<_>>()?;
    let increasing = eigenvalues.windows(2).all(|w| w[1] > w[0]);
    Ok(ProbeReport { sigma, p, half_widths: half_widths.to_vec(), eigenvalues, increasing })
}
