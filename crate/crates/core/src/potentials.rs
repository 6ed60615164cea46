//! Softened gravitational kernel, FFT self-potentials and the nonseparable
//! pair potential.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::grid::{periodic_min_distance, Grid1D};
use crate::spectral::Spectral1D;

/// Densities more negative than this indicate upstream corruption.
const NEGATIVE_DENSITY_FLOOR: f64 = -1e-12;

/// `1 / sqrt(r^2 + eps^2)` evaluated at the periodic minimum distance.
pub fn kernel_eval(r: f64, epsilon: f64, length: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(SimError::InvalidParameter(format!("softening epsilon = {epsilon} must be positive")));
    }
    let d = periodic_min_distance(r, length);
    Ok(1.0 / (d * d + epsilon * epsilon).sqrt())
}

/// Self- and pair-gravity couplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Couplings {
    pub kappa: f64,
    pub gamma: f64,
}

impl Couplings {
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("kappa", kappa), ("gamma", gamma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SimError::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(Self { kappa, gamma })
    }
}

/// Kernel sampled at every grid offset, with its DFT for circular convolution.
#[derive(Debug, Clone)]
pub struct KernelTable {
    epsilon: f64,
    dx: f64,
    samples: Vec<f64>,
    spectrum: Vec<Complex64>,
}

impl KernelTable {
    pub fn new(grid: &Grid1D, epsilon: f64) -> Result<Self> {
        let n = grid.n();
        let samples = (0..n)
            .map(|m| kernel_eval(m as f64 * grid.dx(), epsilon, grid.length()))
            .collect::<Result<Vec<_>>>()?;
        let mut spectrum: Vec<Complex64> = samples.iter().map(|&u| Complex64::new(u, 0.0)).collect();
        Spectral1D::new(n).forward(&mut spectrum);
        Ok(Self { epsilon, dx: grid.dx(), samples, spectrum })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// `U(d_m)` for offset `m` (index distance `i - j` taken modulo `N`).
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// Kernel value between grid points `i` and `j`.
    #[inline]
    pub fn between(&self, i: usize, j: usize) -> f64 {
        let n = self.samples.len();
        self.samples[(i + n - j) % n]
    }

    /// A reusable convolution workspace for this kernel.
    pub fn convolver(&self) -> Convolver {
        Convolver {
            spectrum: self.spectrum.clone(),
            dx: self.dx,
            fft: Spectral1D::new(self.n()),
            buf: vec![Complex64::default(); self.n()],
        }
    }
}

/// FFT convolution `out(x) = sum_j U(x - x_j) * scale * rho(x_j) * dx`.
#[derive(Debug, Clone)]
pub struct Convolver {
    spectrum: Vec<Complex64>,
    dx: f64,
    fft: Spectral1D,
    buf: Vec<Complex64>,
}

impl Convolver {
    pub fn convolve(&mut self, rho: &[f64], scale: f64, out: &mut [f64]) -> Result<()> {
        let n = self.spectrum.len();
        if rho.len() != n || out.len() != n {
            return Err(SimError::Shape(format!("density of length {} on a grid of {n}", rho.len())));
        }
        let weight = scale * self.dx;
        for (i, (b, &r)) in self.buf.iter_mut().zip(rho).enumerate() {
            if r < NEGATIVE_DENSITY_FLOOR {
                return Err(SimError::NegativeDensity { index: i, value: r });
            }
            *b = Complex64::new(r.max(0.0) * weight, 0.0);
        }
        self.fft.forward(&mut self.buf);
        for (b, k) in self.buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        self.fft.inverse(&mut self.buf);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
        Ok(())
    }
}

/// Self-potential `Phi(x) = int U(x - x') mu rho(x') dx'` of one marginal.
pub fn self_potential(rho: &[f64], mass: f64, kernel: &KernelTable) -> Result<Vec<f64>> {
    let mut out = vec![0.0; kernel.n()];
    kernel.convolver().convolve(rho, mass, &mut out)?;
    Ok(out)
}

/// `V(x1, x2) = -gamma mu1 mu2 U(x1 - x2)`, indexed `[x1][x2]`.
pub fn pair_potential_grid(grid: &Grid1D, masses: (f64, f64), gamma: f64, kernel: &KernelTable) -> Array2<f64> {
    let n = grid.n();
    let strength = -gamma * masses.0 * masses.1;
    Array2::from_shape_fn((n, n), |(i, j)| strength * kernel.between(i, j))
}

/// Decomposition of a pair field against two marginal densities.
#[derive(Debug, Clone)]
pub struct ResidualInteraction {
    /// Nonadditive remainder `V - <V>_2 - <V>_1 + <V>_12`.
    pub v_res: Array2<f64>,
    /// Joint expectation `<V>_12`.
    pub mean12: f64,
    /// `<V>_2(x1) = int rho2(x2) V(x1, x2) dx2`.
    pub partial2: Vec<f64>,
    /// `<V>_1(x2) = int rho1(x1) V(x1, x2) dx1`.
    pub partial1: Vec<f64>,
}

pub fn residual_interaction(v: &Array2<f64>, rho1: &[f64], rho2: &[f64], dx: f64) -> ResidualInteraction {
    let (n1, n2) = v.dim();
    assert_eq!(rho1.len(), n1);
    assert_eq!(rho2.len(), n2);
    let partial2: Vec<f64> = (0..n1)
        .map(|i| (0..n2).map(|j| rho2[j] * v[[i, j]]).sum::<f64>() * dx)
        .collect();
    let partial1: Vec<f64> = (0..n2)
        .map(|j| (0..n1).map(|i| rho1[i] * v[[i, j]]).sum::<f64>() * dx)
        .collect();
    let mean12 = partial2.iter().zip(rho1).map(|(p, r)| p * r).sum::<f64>() * dx;
    let v_res = Array2::from_shape_fn((n1, n2), |(i, j)| v[[i, j]] - partial2[i] - partial1[j] + mean12);
    ResidualInteraction { v_res, mean12, partial2, partial1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn baseline() -> (Grid1D, KernelTable) {
        let g = Grid1D::new(256, 40.0).unwrap();
        let k = KernelTable::new(&g, 0.2).unwrap();
        (g, k)
    }

    fn gaussian_density(g: &Grid1D, center: f64, sigma: f64) -> Vec<f64> {
        let raw: Vec<f64> = g.x().iter().map(|x| (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
        let norm: f64 = raw.iter().sum::<f64>() * g.dx();
        raw.into_iter().map(|r| r / norm).collect()
    }

    /// O(N^2) oracle for the convolution.
    fn direct_self_potential(g: &Grid1D, rho: &[f64], mass: f64, eps: f64) -> Vec<f64> {
        let x = g.x();
        x.iter()
            .map(|&xi| {
                x.iter()
                    .zip(rho)
                    .map(|(&xj, &r)| kernel_eval(xi - xj, eps, g.length()).unwrap() * mass * r * g.dx())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn kernel_values() {
        assert_abs_diff_eq!(kernel_eval(0.0, 0.2, 40.0).unwrap(), 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(kernel_eval(1.0, 0.2, 40.0).unwrap(), 1.0 / 1.04f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(kernel_eval(1.0, 0.2, 40.0).unwrap(), 0.980581, epsilon = 1e-6);
        assert_abs_diff_eq!(
            kernel_eval(39.0, 0.2, 40.0).unwrap(),
            kernel_eval(-1.0, 0.2, 40.0).unwrap(),
            epsilon = 1e-15
        );
        assert!(kernel_eval(1.0, 0.0, 40.0).is_err());
        assert!(kernel_eval(1.0, -0.1, 40.0).is_err());
    }

    #[test]
    fn kernel_table_shape() {
        let (g, k) = baseline();
        assert_eq!(k.samples()[0], 5.0);
        assert!(k.samples().iter().all(|&u| u > 0.0 && u <= 5.0));
        let n = g.n();
        for m in 1..n {
            assert_eq!(k.samples()[m], k.samples()[n - m], "offset {m}");
        }
        assert!(k.spectrum().iter().all(|z| z.im.abs() < 1e-10));
    }

    #[test]
    fn point_source_reproduces_kernel() {
        let (g, k) = baseline();
        let mut rho = vec![0.0; g.n()];
        rho[128] = 1.0 / g.dx();
        let phi = self_potential(&rho, 1.0, &k).unwrap();
        for (i, &x) in g.x().iter().enumerate() {
            assert_abs_diff_eq!(phi[i], kernel_eval(x, 0.2, 40.0).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_density_gives_constant_potential() {
        let (g, k) = baseline();
        let rho = vec![1.0 / g.length(); g.n()];
        let phi = self_potential(&rho, 1.0, &k).unwrap();
        let expected = k.samples().iter().sum::<f64>() * g.dx() / g.length();
        for p in phi {
            assert_abs_diff_eq!(p, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_matches_direct_sum() {
        let (g, k) = baseline();
        let rho = gaussian_density(&g, 0.0, 1.0);
        let fast = self_potential(&rho, 1.0, &k).unwrap();
        let slow = direct_self_potential(&g, &rho, 1.0, 0.2);
        let max = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max < 1e-10, "max deviation {max}");
        assert!((fast[128] - slow[128]).abs() < 1e-10);
        assert!(fast.iter().all(|&p| p > 0.0));

        let heavy = self_potential(&rho, 3.0, &k).unwrap();
        assert_abs_diff_eq!(heavy[100], 3.0 * fast[100], epsilon = 1e-12);
    }

    #[test]
    fn negative_densities() {
        let (g, k) = baseline();
        let mut rho = gaussian_density(&g, 0.0, 1.0);
        rho[3] = -1e-14;
        assert!(self_potential(&rho, 1.0, &k).is_ok());
        rho[3] = -1e-9;
        assert!(matches!(self_potential(&rho, 1.0, &k), Err(SimError::NegativeDensity { index: 3, .. })));
    }

    #[test]
    fn even_density_gives_even_potential() {
        let (g, k) = baseline();
        let a = gaussian_density(&g, 2.5, 0.7);
        let b = gaussian_density(&g, -2.5, 0.7);
        let rho: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let phi = self_potential(&rho, 1.0, &k).unwrap();
        let n = g.n();
        for j in 1..n {
            // x_j and x_{N-j} are mirror images about 0
            assert_abs_diff_eq!(phi[j], phi[n - j], epsilon = 1e-12);
        }
    }

    #[test]
    fn pair_field_values() {
        let (g, k) = baseline();
        let v = pair_potential_grid(&g, (1.0, 1.0), 1.0, &k);
        for i in 0..g.n() {
            assert_eq!(v[[i, i]], -5.0);
        }
        assert!(v.iter().all(|&e| e <= 0.0));
        let zero = pair_potential_grid(&g, (1.0, 1.0), 0.0, &k);
        assert!(zero.iter().all(|&e| e == 0.0));

        let heavy = pair_potential_grid(&g, (4.0, 1.0), 1.0, &k);
        // x1 - x2 = 1 is a 6.4-cell offset, not on the grid; use N = 40 over L = 40
        let g1 = Grid1D::new(40, 40.0).unwrap();
        let k1 = KernelTable::new(&g1, 0.2).unwrap();
        let v1 = pair_potential_grid(&g1, (4.0, 1.0), 1.0, &k1);
        assert_abs_diff_eq!(v1[[21, 20]], -4.0 / 1.04f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(v1[[21, 20]], -3.922323, epsilon = 1e-6);
        // depends only on the wrapped difference
        assert_eq!(heavy[[10, 3]], heavy[[17, 10]]);
        assert_eq!(heavy[[0, 255]], heavy[[1, 0]]);
    }

    #[test]
    fn residual_of_additive_field_vanishes() {
        let (g, _) = baseline();
        let n = g.n();
        let v = Array2::from_shape_fn((n, n), |(i, j)| (0.1 * g.x()[i]).sin() + g.x()[j].powi(2) * 0.01);
        let rho1 = gaussian_density(&g, -3.0, 1.0);
        let rho2 = gaussian_density(&g, 3.0, 1.0);
        let r = residual_interaction(&v, &rho1, &rho2, g.dx());
        let max = r.v_res.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 1e-12, "residual {max}");

        let c = Array2::from_elem((n, n), -2.5);
        let r = residual_interaction(&c, &rho1, &rho2, g.dx());
        assert!(r.v_res.iter().all(|v| v.abs() < 1e-12));
        assert_abs_diff_eq!(r.mean12, -2.5, epsilon = 1e-12);
    }

    /// Direct quadrature of `<V_res^2>_12` without the partial-expectation shortcuts.
    fn direct_residual_square(g: &Grid1D, rho1: &[f64], rho2: &[f64]) -> f64 {
        let n = g.n();
        let dx = g.dx();
        let u = |a: f64, b: f64| -1.0 / ((periodic_min_distance(a - b, g.length())).powi(2) + 0.04).sqrt();
        let x = g.x();
        let mut p2 = vec![0.0; n];
        let mut p1 = vec![0.0; n];
        let mut m = 0.0;
        for i in 0..n {
            for j in 0..n {
                let val = u(x[i], x[j]);
                p2[i] += rho2[j] * val * dx;
                p1[j] += rho1[i] * val * dx;
                m += rho1[i] * rho2[j] * val * dx * dx;
            }
        }
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let res = u(x[i], x[j]) - p2[i] - p1[j] + m;
                acc += rho1[i] * rho2[j] * res * res * dx * dx;
            }
        }
        acc
    }

    #[test]
    fn residual_square_matches_direct_quadrature() {
        let (g, k) = baseline();
        let v = pair_potential_grid(&g, (1.0, 1.0), 1.0, &k);
        let rho1 = gaussian_density(&g, -3.0, 1.0);
        let rho2 = gaussian_density(&g, 3.0, 1.0);
        let r = residual_interaction(&v, &rho1, &rho2, g.dx());
        let dx = g.dx();
        let mut fast = 0.0;
        let mut mean_res = 0.0;
        for (i, r1) in rho1.iter().enumerate() {
            for (j, r2) in rho2.iter().enumerate() {
                let w = r1 * r2 * dx * dx;
                fast += w * r.v_res[[i, j]].powi(2);
                mean_res += w * r.v_res[[i, j]];
            }
        }
        let slow = direct_residual_square(&g, &rho1, &rho2);
        assert!(fast > 0.0);
        assert!(((fast - slow) / slow).abs() < 1e-10, "{fast} vs {slow}");
        assert!(mean_res.abs() < 1e-10);
        // both marginal expectations of V_res vanish
        for i in 0..g.n() {
            let m: f64 = (0..g.n()).map(|j| rho2[j] * r.v_res[[i, j]]).sum::<f64>() * dx;
            assert!(m.abs() < 1e-10);
        }
        for j in 0..g.n() {
            let m: f64 = (0..g.n()).map(|i| rho1[i] * r.v_res[[i, j]]).sum::<f64>() * dx;
            assert!(m.abs() < 1e-10);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn convolution_is_linear(
            alpha in 0.0f64..3.0, beta in 0.0f64..3.0,
            ca in -8.0f64..8.0, cb in -8.0f64..8.0,
            sa in 0.4f64..3.0, sb in 0.4f64..3.0,
        ) {
            let (g, k) = baseline();
            let a = gaussian_density(&g, ca, sa);
            let b = gaussian_density(&g, cb, sb);
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let pa = self_potential(&a, 1.0, &k).unwrap();
            let pb = self_potential(&b, 1.0, &k).unwrap();
            let pm = self_potential(&mix, 1.0, &k).unwrap();
            let scale = pm.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            for i in 0..g.n() {
                let lin = alpha * pa[i] + beta * pb[i];
                prop_assert!((pm[i] - lin).abs() <= 1e-12 * scale.max(1.0));
            }
        }
    }
}
