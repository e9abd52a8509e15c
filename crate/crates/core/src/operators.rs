//! Scattering operators `L = P - Sigma` on a velocity grid and the growth
//! extension `Lr f = L f + r (M rho - f)`.
//!
//! Matrices act on nodal values. The weighted column sums of `matrix_l`
//! vanish, i.e. `sum_i w_i (L f)_i = 0`, for every family built here.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::velocity::{Equilibrium, VelocityGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Bgk,
    Kernel,
    EllipticNeumann,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Bgk => "bgk",
            OperatorKind::Kernel => "kernel",
            OperatorKind::EllipticNeumann => "elliptic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    kind: OperatorKind,
    grid: VelocityGrid,
    equilibrium: Equilibrium,
    growth_rate: f64,
    matrix_l: DMatrix<f64>,
    matrix_ext: DMatrix<f64>,
    /// Loss rate plus growth rate at each node.
    sigma: Vec<f64>,
}

fn check_growth(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("growth rate must be >= 0, got {r}")))
    }
}

/// `M_i w_j`: the rank-one map `f -> M rho(f)`.
fn density_projector(grid: &VelocityGrid, m: &Equilibrium) -> DMatrix<f64> {
    let n = grid.len();
    let (w, mv) = (grid.weights(), m.values());
    DMatrix::from_fn(n, n, |i, j| mv[i] * w[j])
}

impl DiscreteOperator {
    fn assemble(
        kind: OperatorKind,
        grid: &VelocityGrid,
        m: &Equilibrium,
        matrix_l: DMatrix<f64>,
        loss: Vec<f64>,
        r: f64,
    ) -> Self {
        let n = grid.len();
        let mut matrix_ext = matrix_l.clone();
        if r != 0.0 {
            matrix_ext += density_projector(grid, m) * r;
            for i in 0..n {
                matrix_ext[(i, i)] -= r;
            }
        }
        Self {
            kind,
            grid: grid.clone(),
            equilibrium: m.clone(),
            growth_rate: r,
            matrix_l,
            matrix_ext,
            sigma: loss.iter().map(|s| s + r).collect(),
        }
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn equilibrium(&self) -> &Equilibrium {
        &self.equilibrium
    }

    pub fn growth_rate(&self) -> f64 {
        self.growth_rate
    }

    pub fn matrix_l(&self) -> &DMatrix<f64> {
        &self.matrix_l
    }

    pub fn matrix_ext(&self) -> &DMatrix<f64> {
        &self.matrix_ext
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Gain part of the extended operator, `matrix_ext + diag(sigma)`.
    pub fn gain(&self) -> DMatrix<f64> {
        let mut g = self.matrix_ext.clone();
        for (i, s) in self.sigma.iter().enumerate() {
            g[(i, i)] += s;
        }
        g
    }

    /// `matrix_ext * f`.
    pub fn apply_ext(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_len(self.len(), f.len())?;
        Ok((&self.matrix_ext * DVector::from_column_slice(f)).as_slice().to_vec())
    }

    /// Same family with the scattering part multiplied by `mu`, growth unchanged.
    pub fn scaled(&self, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Config(format!("scaling factor must be positive, got {mu}")));
        }
        let loss: Vec<f64> = self.sigma.iter().map(|s| mu * (s - self.growth_rate)).collect();
        Ok(Self::assemble(self.kind, &self.grid, &self.equilibrium, &self.matrix_l * mu, loss, self.growth_rate))
    }

    /// `Lr / (1 + r)` viewed as a pure scattering operator with no growth.
    /// Its Hamiltonian `Hb` satisfies `H(p) = (1 + r) Hb(p / (1 + r))`.
    pub fn barycentric(&self) -> Self {
        let s = 1.0 + self.growth_rate;
        let loss: Vec<f64> = self.sigma.iter().map(|x| x / s).collect();
        Self::assemble(self.kind, &self.grid, &self.equilibrium, &self.matrix_ext / s, loss, 0.0)
    }
}

/// BGK relaxation `L f = M rho - f`.
pub fn build_bgk(grid: &VelocityGrid, m: &Equilibrium, r: f64) -> Result<DiscreteOperator> {
    check_growth(r)?;
    check_len(grid.len(), m.values().len())?;
    let mut l = density_projector(grid, m);
    for i in 0..grid.len() {
        l[(i, i)] -= 1.0;
    }
    Ok(DiscreteOperator::assemble(OperatorKind::Bgk, grid, m, l, vec![1.0; grid.len()], r))
}

/// Kernel operator `(L f)_i = sum_j w_j K_ij f_j - (sum_j w_j K_ji) f_i`.
///
/// `kernel` is row-major, `kernel[i * n + j] = K(v_i, v_j)`. The kernel must
/// satisfy `sum_j w_j K_ij M_j = M_i sum_j w_j K_ji` to within 1e-8.
pub fn build_kernel(grid: &VelocityGrid, kernel: &[f64], r: f64, m: &Equilibrium) -> Result<DiscreteOperator> {
    check_growth(r)?;
    let n = grid.len();
    check_len(n * n, kernel.len())?;
    check_len(n, m.values().len())?;
    if let Some(bad) = kernel.iter().position(|k| !(*k >= 0.0) || !k.is_finite()) {
        return Err(Error::Config(format!(
            "kernel entry ({}, {}) is negative or not finite",
            bad / n,
            bad % n
        )));
    }
    let w = grid.weights();
    let mv = m.values();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let loss: Vec<f64> = (0..n).map(|i| (0..n).map(|j| w[j] * k(j, i)).sum()).collect();

    let mut worst = (0, 0.0f64);
    for i in 0..n {
        let gain: f64 = (0..n).map(|j| w[j] * k(i, j) * mv[j]).sum();
        let defect = (gain - mv[i] * loss[i]).abs();
        if defect > worst.1 {
            worst = (i, defect);
        }
    }
    if worst.1 > 1e-8 {
        return Err(Error::Balance { node: worst.0, velocity: grid.nodes()[worst.0], defect: worst.1 });
    }

    let mut l = DMatrix::from_fn(n, n, |i, j| w[j] * k(i, j));
    for i in 0..n {
        l[(i, i)] -= loss[i];
    }
    Ok(DiscreteOperator::assemble(OperatorKind::Kernel, grid, m, l, loss, r))
}

/// Neumann diffusion `d/dv (D d/dv)` in conservative flux form.
///
/// Cell `i` has width `w_i`; the flux between nodes `i` and `i+1` is
/// `D_{i+1/2} (f_{i+1} - f_i) / (v_{i+1} - v_i)` with the arithmetic mean of
/// `D`, and no flux leaves through the ends. On a midpoint grid this is the
/// usual three-point stencil divided by `dv^2`.
pub fn build_elliptic(grid: &VelocityGrid, diffusivity: &[f64], r: f64, m: &Equilibrium) -> Result<DiscreteOperator> {
    check_growth(r)?;
    let n = grid.len();
    check_len(n, diffusivity.len())?;
    check_len(n, m.values().len())?;
    if diffusivity.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::Config("diffusivity must be positive".into()));
    }
    if !m.is_uniform() {
        return Err(Error::Config("the Neumann operator needs a uniform equilibrium".into()));
    }
    let (v, w) = (grid.nodes(), grid.weights());
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        let c = 0.5 * (diffusivity[i] + diffusivity[i + 1]) / (v[i + 1] - v[i]);
        // flux c (f_{i+1} - f_i) enters cell i and leaves cell i+1
        l[(i, i + 1)] += c / w[i];
        l[(i, i)] -= c / w[i];
        l[(i + 1, i)] += c / w[i + 1];
        l[(i + 1, i + 1)] -= c / w[i + 1];
    }
    Ok(DiscreteOperator::assemble(OperatorKind::EllipticNeumann, grid, m, l, vec![0.0; n], r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::{make_gauss_grid, make_grid, uniform_equilibrium};
    use proptest::prelude::*;

    fn weighted_column_sums(op: &DiscreteOperator) -> Vec<f64> {
        let w = op.grid().weights();
        let n = op.len();
        (0..n).map(|j| (0..n).map(|i| w[i] * op.matrix_l()[(i, j)]).sum()).collect()
    }

    fn max_abs(x: &[f64]) -> f64 {
        x.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    #[test]
    fn bgk_basics() {
        let g = make_grid(1.0, 40).unwrap();
        let m = uniform_equilibrium(&g);
        let op = build_bgk(&g, &m, 0.0).unwrap();
        let lm = &op.matrix_l * DVector::from_column_slice(m.values());
        assert!(lm.amax() < 1e-14);
        assert!(max_abs(&weighted_column_sums(&op)) < 1e-14);
        assert_eq!(op.matrix_ext(), op.matrix_l());
        assert!(op.sigma().iter().all(|&s| s == 1.0));
        let op = build_bgk(&g, &m, 1.0).unwrap();
        assert!(op.sigma().iter().all(|&s| s == 2.0));
        assert!(build_bgk(&g, &m, -1.0).is_err());
    }

    #[test]
    fn apply_ext_edge_cases() {
        let g = make_grid(1.0, 5).unwrap();
        let m = uniform_equilibrium(&g);
        for r in [0.0, 0.7, 3.0] {
            let op = build_bgk(&g, &m, r).unwrap();
            assert!(max_abs(&op.apply_ext(m.values()).unwrap()) < 1e-12);
            assert_eq!(op.apply_ext(&[0.0; 5]).unwrap(), vec![0.0; 5]);
        }
        let op = build_bgk(&g, &m, 1.0).unwrap();
        assert!(op.apply_ext(&[1.0; 4]).is_err());
        // f = e_2: rho = w_2 = 0.4, so (Lr f)_i = (1 + r) M_i rho - (1 + r) f_i
        let out = op.apply_ext(&[0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let expect = [0.4, 0.4, 0.4 - 2.0, 0.4, 0.4];
        for (a, b) in out.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn bgk_as_kernel() {
        let g = make_gauss_grid(1.0, 21).unwrap();
        let m = uniform_equilibrium(&g);
        let r = 1.5;
        let n = g.len();
        let k: Vec<f64> = (0..n * n).map(|idx| (1.0 + r) * m.values()[idx / n]).collect();
        let as_kernel = build_kernel(&g, &k, 0.0, &m).unwrap();
        let bgk = build_bgk(&g, &m, r).unwrap();
        assert!((as_kernel.matrix_ext() - bgk.matrix_ext()).amax() < 1e-14);
        assert!((as_kernel.gain() - bgk.gain()).amax() < 1e-14);
    }

    #[test]
    fn constant_kernel_balances_uniform_equilibrium() {
        let g = make_grid(1.0, 30).unwrap();
        let m = uniform_equilibrium(&g);
        let op = build_kernel(&g, &vec![0.8; 900], 0.5, &m).unwrap();
        let lm = op.matrix_l() * DVector::from_column_slice(m.values());
        assert!(lm.amax() < 1e-13);
    }

    #[test]
    fn unbalanced_kernel_rejected() {
        let g = make_grid(1.0, 10).unwrap();
        let m = uniform_equilibrium(&g);
        let k: Vec<f64> = (0..100).map(|idx| 1.0 + (idx / 10) as f64 * 0.1 + (idx % 10) as f64 * 0.01).collect();
        match build_kernel(&g, &k, 0.0, &m) {
            Err(Error::Balance { defect, .. }) => assert!(defect > 1e-8),
            other => panic!("expected balance error, got {other:?}"),
        }
        let mut neg = vec![1.0; 100];
        neg[7] = -1.0;
        assert!(build_kernel(&g, &neg, 0.0, &m).is_err());
    }

    #[test]
    fn elliptic_stencil() {
        let g = make_grid(1.0, 400).unwrap();
        let m = uniform_equilibrium(&g);
        let op = build_elliptic(&g, &vec![1.0; 400], 0.0, &m).unwrap();
        let ones = DVector::from_element(400, 1.0);
        assert_eq!((op.matrix_l() * ones).amax(), 0.0);
        assert!(max_abs(&weighted_column_sums(&op)) < 1e-13 * 400.0 * 400.0 / 4.0);
        let k = std::f64::consts::FRAC_PI_2;
        // sin(k v) has zero flux at v = +-1
        let f: Vec<f64> = g.nodes().iter().map(|v| (k * v).sin()).collect();
        let lf = op.matrix_l() * DVector::from_column_slice(&f);
        let mut worst = 0.0f64;
        for i in 0..400 {
            worst = worst.max((lf[i] + k * k * f[i]).abs());
        }
        assert!(worst / (k * k) < 1e-3, "relative error {worst}");
        let dv = 2.0 / 400.0;
        assert!((op.matrix_l()[(5, 5)] + 2.0 / (dv * dv)).abs() < 1e-6);
        assert!((op.matrix_l()[(5, 6)] - 1.0 / (dv * dv)).abs() < 1e-6);
    }

    #[test]
    fn elliptic_needs_uniform_equilibrium() {
        let g = make_grid(1.0, 4).unwrap();
        let m = Equilibrium::from_values(&g, vec![0.2, 0.8, 0.8, 0.2]).unwrap();
        assert!(build_elliptic(&g, &[1.0; 4], 0.0, &m).is_err());
        let m = uniform_equilibrium(&g);
        assert!(build_elliptic(&g, &[1.0, 0.0, 1.0, 1.0], 0.0, &m).is_err());
    }

    #[test]
    fn scaled_and_barycentric() {
        let g = make_grid(1.0, 9).unwrap();
        let m = uniform_equilibrium(&g);
        let op = build_bgk(&g, &m, 1.0).unwrap();
        let s = op.scaled(2.0).unwrap();
        assert!((s.matrix_l() - op.matrix_l() * 2.0).amax() < 1e-15);
        assert!(s.sigma().iter().all(|&x| (x - 3.0).abs() < 1e-15));
        let b = op.barycentric();
        assert_eq!(b.growth_rate(), 0.0);
        assert!((b.matrix_ext() * 2.0 - op.matrix_ext()).amax() < 1e-15);
        assert!(b.sigma().iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    fn random_balanced_kernel(n: usize, seed: &[f64]) -> (VelocityGrid, Equilibrium, Vec<f64>) {
        let g = make_grid(1.0, n).unwrap();
        // M symmetric, K_ij = M_i g(v_i, v_j) with g symmetric
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + seed[i.min(n - 1 - i) % seed.len()]).collect();
        let mass = g.integrate(&raw);
        let m = Equilibrium::from_values(&g, raw.iter().map(|x| x / mass).collect()).unwrap();
        let v = g.nodes();
        let k = (0..n * n)
            .map(|idx| {
                let (i, j) = (idx / n, idx % n);
                m.values()[i] * (1.0 + seed[0] * (v[i] * v[j]).cos() + (v[i] - v[j]).powi(2))
            })
            .collect();
        (g, m, k)
    }

    proptest! {
        #[test]
        fn every_family_conserves_mass(
            seed in proptest::collection::vec(0.0f64..1.0, 1..6),
            n in 3usize..30,
            r in 0.0f64..3.0,
            f in proptest::collection::vec(0.0f64..1.0, 30),
        ) {
            let (g, m, k) = random_balanced_kernel(n, &seed);
            let f = &f[..n];
            let ops = [
                build_bgk(&g, &m, r).unwrap(),
                build_kernel(&g, &k, r, &m).unwrap(),
                build_elliptic(&g, &vec![1.0 + seed[0]; n], r, &uniform_equilibrium(&g)).unwrap(),
            ];
            for op in &ops {
                let lf = op.matrix_l() * DVector::from_column_slice(f);
                let scale = op.matrix_l().amax() * f.iter().sum::<f64>().max(1.0);
                prop_assert!(g.integrate(lf.as_slice()).abs() <= 1e-12 * scale);
                let eq = op.equilibrium().values();
                prop_assert!((op.matrix_l() * DVector::from_column_slice(eq)).amax() <= 1e-10 * op.matrix_l().amax().max(1.0));
                prop_assert!(max_abs(&op.apply_ext(eq).unwrap()) <= 1e-10 * op.matrix_ext().amax().max(1.0));
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            prop_assert!(op.matrix_ext()[(i, j)] >= 0.0);
                        }
                    }
                }
            }
        }
    }
}
