use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::grid::Grid1D;

/// Joint two-particle amplitude `Psi(x1, x2)` on a shared grid.
///
/// Stored row-major with `x1` as the slow index.
#[derive(Debug, Clone)]
pub struct TwoBodyState {
    pub psi: Array2<Complex64>,
    pub grid: Grid1D,
    pub masses: (f64, f64),
    pub t: f64,
}

impl TwoBodyState {
    pub fn new(psi: Array2<Complex64>, grid: Grid1D, masses: (f64, f64)) -> Result<Self> {
        let n = grid.n();
        if psi.dim() != (n, n) {
            return Err(SimError::Shape(format!("amplitude is {:?}, grid needs ({n}, {n})", psi.dim())));
        }
        if !psi.is_standard_layout() {
            return Err(SimError::Shape("amplitude must be in row-major layout".into()));
        }
        for (name, m) in [("mu1", masses.0), ("mu2", masses.1)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(SimError::InvalidParameter(format!("{name} = {m} must be positive")));
            }
        }
        Ok(Self { psi, grid, masses, t: 0.0 })
    }

    /// `psi(x1, x2) = a(x1) b(x2)`.
    pub fn product(a: &[Complex64], b: &[Complex64], grid: Grid1D, masses: (f64, f64)) -> Result<Self> {
        let n = grid.n();
        if a.len() != n || b.len() != n {
            return Err(SimError::Shape("factor length does not match grid".into()));
        }
        let psi = Array2::from_shape_fn((n, n), |(i, j)| a[i] * b[j]);
        Self::new(psi, grid, masses)
    }

    /// `sum |psi|^2 dx^2`.
    pub fn norm_sqr(&self) -> f64 {
        let dx = self.grid.dx();
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx * dx
    }

    pub fn normalize(&mut self) {
        let scale = 1.0 / self.norm_sqr().sqrt();
        self.psi.mapv_inplace(|z| z * scale);
    }

    /// Particle-exchanged state `Psi(x2, x1)` with swapped masses.
    pub fn exchanged(&self) -> Self {
        let mut swapped = self.clone();
        swapped.psi = self.psi.t().as_standard_layout().into_owned();
        swapped.masses = (self.masses.1, self.masses.0);
        swapped
    }

    /// `max |Psi(x1,x2) - Psi(x2,x1)|`.
    pub fn exchange_asymmetry(&self) -> f64 {
        let n = self.grid.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.psi[[i, j]] - self.psi[[j, i]]).norm());
            }
        }
        worst
    }

    /// Grid L2 distance `sqrt(sum |a - b|^2 dx^2)`.
    pub fn distance(&self, other: &Self) -> f64 {
        let dx = self.grid.dx();
        (self.psi.iter().zip(other.psi.iter()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * dx * dx).sqrt()
    }

    pub fn conjugate(&mut self) {
        self.psi.mapv_inplace(|z| z.conj());
    }

    pub fn as_slice(&self) -> &[Complex64] {
        self.psi.as_slice().expect("row-major amplitude")
    }

    pub fn as_slice_mut(&mut self) -> &mut [Complex64] {
        self.psi.as_slice_mut().expect("row-major amplitude")
    }
}
