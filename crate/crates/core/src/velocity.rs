//! Velocity grids on the symmetric interval `[-v_max, v_max]`.
//!
//! Two quadratures are offered. The midpoint rule is the default; Gauss-Legendre
//! nodes are used where the spectral solvers need more than second order.
//! Both are symmetric with positive weights, which is all the operator
//! constructions rely on for discrete conservation.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Midpoint,
    GaussLegendre,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    v_max: f64,
    rule: Quadrature,
}

fn validate(v_max: f64, n: usize) -> Result<()> {
    if n < 3 {
        return Err(Error::Config(format!("velocity grid needs at least 3 nodes, got {n}")));
    }
    if !(v_max > 0.0 && v_max.is_finite()) {
        return Err(Error::Config(format!("v_max must be positive, got {v_max}")));
    }
    Ok(())
}

impl VelocityGrid {
    /// Midpoints of `n` equal cells.
    pub fn midpoint(v_max: f64, n: usize) -> Result<Self> {
        validate(v_max, n)?;
        let dv = 2.0 * v_max / n as f64;
        let mut nodes = vec![0.0; n];
        for i in 0..n / 2 {
            // build from the outside in and mirror, so symmetry is exact
            let v = -v_max + (i as f64 + 0.5) * dv;
            nodes[i] = v;
            nodes[n - 1 - i] = -v;
        }
        Ok(Self { nodes, weights: vec![dv; n], v_max, rule: Quadrature::Midpoint })
    }

    /// Gauss-Legendre nodes scaled to `[-v_max, v_max]`.
    pub fn gauss_legendre(v_max: f64, n: usize) -> Result<Self> {
        validate(v_max, n)?;
        let (x, w) = gauss_legendre_unit(n);
        Ok(Self {
            nodes: x.iter().map(|xi| xi * v_max).collect(),
            weights: w.iter().map(|wi| wi * v_max).collect(),
            v_max,
            rule: Quadrature::GaussLegendre,
        })
    }

    pub fn new(v_max: f64, n: usize, rule: Quadrature) -> Result<Self> {
        match rule {
            Quadrature::Midpoint => Self::midpoint(v_max, n),
            Quadrature::GaussLegendre => Self::gauss_legendre(v_max, n),
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn rule(&self) -> Quadrature {
        self.rule
    }

    /// `sum_i w_i values_i`.
    ///
    /// # Panics
    /// If `values` does not have one entry per node.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "integrate: one value per velocity node");
        // Neumaier summation
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (w, f) in self.weights.iter().zip(values) {
            let x = w * f;
            let t = sum + x;
            comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
            sum = t;
        }
        sum + comp
    }
}

/// `make_grid` under its usual name: the midpoint grid.
pub fn make_grid(v_max: f64, n: usize) -> Result<VelocityGrid> {
    VelocityGrid::midpoint(v_max, n)
}

pub fn make_gauss_grid(v_max: f64, n: usize) -> Result<VelocityGrid> {
    VelocityGrid::gauss_legendre(v_max, n)
}

// Newton on P_n from the Tricomi initial guess; the weights follow from P_n'.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Equilibrium density `M` sampled at the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    values: Vec<f64>,
}

impl Equilibrium {
    /// `M = 1/(2 v_max)`.
    pub fn uniform(grid: &VelocityGrid) -> Self {
        Self { values: vec![0.5 / grid.v_max(); grid.len()] }
    }

    /// Checks nonnegativity, unit mass and zero mean flux.
    pub fn from_values(grid: &VelocityGrid, values: Vec<f64>) -> Result<Self> {
        check_len(grid.len(), values.len())?;
        if values.iter().any(|m| !(*m >= 0.0) || !m.is_finite()) {
            return Err(Error::Config("equilibrium values must be finite and nonnegative".into()));
        }
        let mass = grid.integrate(&values);
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("equilibrium mass is {mass}, expected 1")));
        }
        let flux: f64 = grid.nodes().iter().zip(grid.weights()).zip(&values).map(|((v, w), m)| v * w * m).sum();
        if flux.abs() > 1e-12 {
            return Err(Error::Config(format!("equilibrium mean velocity is {flux:e}, expected 0")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_uniform(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }
}

pub fn uniform_equilibrium(grid: &VelocityGrid) -> Equilibrium {
    Equilibrium::uniform(grid)
}
