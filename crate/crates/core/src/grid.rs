//! Periodic one-dimensional grid shared by both particle axes.

use std::f64::consts::PI;

use crate::error::{Result, SimError};

/// Uniform periodic grid on `[-L/2, L/2)` together with its FFT-ordered
/// wavenumbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    n: usize,
    length: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
}

impl Grid1D {
    /// Build a grid of `n` points on a periodic box of length `length`.
    ///
    /// `n` must be even and at least 8. The first point sits at `-L/2`, so
    /// the origin is a grid point.
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 {
            return Err(SimError::InvalidGrid(format!("N = {n} is too small (need N >= 8)")));
        }
        if !n.is_multiple_of(2) {
            return Err(SimError::InvalidGrid(format!("N = {n} must be even")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SimError::InvalidGrid(format!("L = {length} must be positive and finite")));
        }
        let dx = length / n as f64;
        let x = (0..n).map(|j| -0.5 * length + j as f64 * dx).collect();
        let k = (0..n).map(|j| 2.0 * PI * fft_index(j, n) as f64 / length).collect();
        Ok(Self { n, length, dx, x, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Grid coordinates `x_j = -L/2 + j dx`.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Wavenumbers in standard FFT order (`0, 1, .., N/2-1, -N/2, .., -1` times `2 pi / L`).
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    /// Index of the grid point nearest to `x` after periodic wrapping.
    pub fn nearest_index(&self, x: f64) -> usize {
        let shifted = periodic_min_distance(x, self.length) + 0.5 * self.length;
        ((shifted / self.dx).round() as usize) % self.n
    }

    /// Periodic minimum distance between grid points `i` and `j` (`x_i - x_j` wrapped).
    pub fn offset_distance(&self, i: usize, j: usize) -> f64 {
        periodic_min_distance((i as f64 - j as f64) * self.dx, self.length)
    }
}

/// Signed FFT frequency index of bin `j` for a transform of length `n`.
pub fn fft_index(j: usize, n: usize) -> isize {
    if j < n / 2 {
        j as isize
    } else {
        j as isize - n as isize
    }
}

/// Wrap a displacement into the half-open interval `[-L/2, L/2)`.
///
/// `|r| = L/2` maps to `-L/2`.
pub fn periodic_min_distance(r: f64, length: f64) -> f64 {
    let half = 0.5 * length;
    let mut wrapped = r - length * ((r + half) / length).floor();
    if wrapped >= half {
        wrapped -= length;
    }
    if wrapped < -half {
        wrapped += length;
    }
    wrapped
}
