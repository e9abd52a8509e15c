use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

fn growth_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if r >= 0.0 && r.is_finite() {
        Ok(r)
    } else {
        Err("growth rate must be ≥ 0".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be positive, got {s}"))
    }
}

fn finite(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("not a number: {s}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("must be finite, got {s}"))
    }
}

fn cfl(s: &str) -> Result<f64, String> {
    let x = positive(s)?;
    if x <= 0.9 {
        Ok(x)
    } else {
        Err(format!("cfl must be at most 0.9, got {s}"))
    }
}

/// Strictly decreasing list of positive scalings.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsList(pub Vec<f64>);

fn eps_list(s: &str) -> Result<EpsList, String> {
    let v: Vec<f64> = s.split(',').map(|t| positive(t.trim())).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty epsilon list".into());
    }
    if v.windows(2).any(|w| w[1] >= w[0]) {
        return Err("epsilon list must be strictly decreasing".into());
    }
    Ok(EpsList(v))
}

#[derive(Debug, Parser)]
#[command(name = "kinfront", version, about = "Front propagation for kinetic reaction-transport equations")]
pub struct Cli {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    /// `H = D p^2`
    Quadratic,
    /// BGK closed form
    Bgk,
    /// BGK through the discrete eigenproblem
    BgkSpectral,
    /// Kernel read from `--kernel-file`
    Kernel,
    /// Neumann diffusion in velocity with diffusivity `--D`
    Elliptic,
    /// Velocity Fokker-Planck, `H = sigma^4 p^2`
    Vfp,
    /// Convolution with a standard normal kernel
    Gaussian,
    /// Convolution with the kernel `exp(-|x|)/2`
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Midpoint,
    Gauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    /// `min(4 p* |x|, 50)`, standing for a point mass
    Point,
    /// `min(2 max(|x| - 0.5, 0), 2)`
    Plateau,
    /// `min(x^2, 1)`
    Bump,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "bgk")]
    pub model: Model,
    #[arg(long = "vmax", value_parser = positive, default_value = "1")]
    pub v_max: f64,
    /// Number of velocity nodes.
    #[arg(long = "nv", default_value_t = 32)]
    pub nv: usize,
    #[arg(long, value_enum, default_value = "midpoint")]
    pub quadrature: Rule,
    #[arg(long, value_parser = growth_rate, default_value = "1", allow_negative_numbers = true)]
    pub r: f64,
    /// Diffusivity of the quadratic and elliptic models.
    #[arg(long = "D", value_parser = positive, default_value = "1")]
    pub d: f64,
    #[arg(long, value_parser = positive, default_value = "1")]
    pub sigma: f64,
    /// N x N kernel matrix for `--model kernel`.
    #[arg(long = "kernel-file")]
    pub kernel_file: Option<PathBuf>,
    /// Momentum step of tabulated Hamiltonians.
    #[arg(long, value_parser = positive, default_value = "0.01")]
    pub dp: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate H(p) and H'(p).
    Hamiltonian {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "p-max", value_parser = positive, default_value = "3")]
        p_max: f64,
    },
    /// Minimal front speed c* = min (H(p) + r) / p.
    Speed {
        #[command(flatten)]
        model: ModelArgs,
        /// Reach of the table for spectral models.
        #[arg(long = "p-max", value_parser = positive, default_value = "8")]
        p_max: f64,
    },
    /// Hamilton-Jacobi front propagation.
    Hj {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = positive, default_value = "0.01")]
        dx: f64,
        #[arg(long = "T", value_parser = positive, default_value = "5")]
        t_final: f64,
        #[arg(long, value_parser = cfl, default_value = "0.9")]
        cfl: f64,
        /// Half-width of the domain; chosen from c* T when absent.
        #[arg(long = "x-max", value_parser = positive)]
        x_max: Option<f64>,
        #[arg(long, value_enum, default_value = "point")]
        init: Init,
        #[arg(long = "snapshot-every", value_parser = positive)]
        snapshot_every: Option<f64>,
        /// Also report the distance to the Hopf-Lax formula.
        #[arg(long = "hopf-lax")]
        hopf_lax: bool,
        #[arg(long = "p-max", value_parser = positive, default_value = "8")]
        p_max: f64,
    },
    /// One kinetic run at fixed epsilon.
    Kinetic {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = positive, default_value = "0.25")]
        eps: f64,
        #[arg(long, value_parser = positive, default_value = "0.01")]
        dx: f64,
        #[arg(long = "T", value_parser = positive, default_value = "1")]
        t_final: f64,
        #[arg(long, value_parser = cfl, default_value = "0.9")]
        cfl: f64,
        #[arg(long = "x-max", value_parser = positive, default_value = "2.5")]
        x_max: f64,
        #[arg(long, value_enum, default_value = "plateau")]
        init: Init,
        #[arg(long = "snapshot-every", value_parser = positive)]
        snapshot_every: Option<f64>,
    },
    /// Kinetic runs over a decreasing epsilon list against the Hamilton-Jacobi limit.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_parser = eps_list, default_value = "0.5,0.25,0.125")]
        eps: EpsList,
        #[arg(long, value_parser = positive, default_value = "0.01")]
        dx: f64,
        #[arg(long = "T", value_parser = positive, default_value = "1")]
        t_final: f64,
        #[arg(long, value_parser = cfl, default_value = "0.9")]
        cfl: f64,
        #[arg(long = "x-max", value_parser = positive, default_value = "2.5")]
        x_max: f64,
        #[arg(long, value_enum, default_value = "plateau")]
        init: Init,
        /// Distance kept from the edge of the nullset in the density check.
        #[arg(long, value_parser = finite, default_value = "0.5")]
        margin: f64,
    },
    /// Checks on the Kolmogorov fundamental solution and the diffusion probe.
    Kolmogorov {
        #[arg(long, value_parser = positive, default_value = "1")]
        sigma: f64,
        #[arg(long, value_parser = finite, default_value = "0", allow_negative_numbers = true)]
        w: f64,
        #[arg(long, value_enum, default_value = "all")]
        check: KolmogorovCheck,
    },
    /// Eigenvector of a convolution operator by Fourier synthesis.
    Nonlocal {
        #[arg(long, value_enum, default_value = "laplace")]
        kernel: KernelKind,
        /// Two columns `x, K` on a uniform symmetric grid, for `--kernel custom`.
        #[arg(long = "kernel-file")]
        kernel_file: Option<PathBuf>,
        #[arg(long, value_parser = finite, default_value = "0", allow_negative_numbers = true)]
        p: f64,
        #[arg(long, value_enum, default_value = "all")]
        check: NonlocalCheck,
        /// log2 of the FFT length.
        #[arg(long = "log2-n", default_value_t = 19)]
        log2_n: u32,
        #[arg(long = "half-width", value_parser = positive, default_value = "24")]
        half_width: f64,
        #[arg(long = "edge-tol", value_parser = positive, default_value = "1e-4")]
        edge_tol: f64,
        /// Profile rows are written for |v| up to this.
        #[arg(long = "v-window", value_parser = positive, default_value = "8")]
        v_window: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KolmogorovCheck {
    Mass,
    Residual,
    Phase,
    Vfp,
    Nonexistence,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelKind {
    Gaussian,
    Laplace,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NonlocalCheck {
    Positivity,
    Normalization,
    Fourier,
    All,
}
