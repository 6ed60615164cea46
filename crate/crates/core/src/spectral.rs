//! Thin wrappers over `rustfft` for the 1D and 2D transforms used by the
//! propagator, the convolutions and the Wigner transforms.
//!
//! Forward transforms are unnormalised; inverse transforms divide by the
//! number of points, so a forward/inverse pair is the identity.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Planned length-`n` transform pair with its own scratch space.
#[derive(Clone)]
pub struct Spectral1D {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Spectral1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectral1D").field("n", &self.n).finish()
    }
}

impl Spectral1D {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self { n, forward, inverse, scratch: vec![Complex64::default(); len] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward transform of every length-`n` chunk of `data`.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len() % self.n, 0);
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// In-place normalised inverse transform of every length-`n` chunk of `data`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len() % self.n, 0);
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let scale = 1.0 / self.n as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    /// Inverse transform without the `1/n` normalisation.
    pub fn inverse_unnormalized(&mut self, data: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, &mut self.scratch);
    }
}

/// Square 2D transform for row-major `n x n` arrays indexed `[x1][x2]`.
///
/// To save two transposes per step the spectrum is kept in transposed
/// layout `[k2][k1]`; callers that multiply by a spectral factor must build
/// it in that layout (see [`Spectral2D::spectral_index`]).
#[derive(Clone, Debug)]
pub struct Spectral2D {
    n: usize,
    rows: Spectral1D,
    spectrum: Vec<Complex64>,
}

impl Spectral2D {
    pub fn new(n: usize) -> Self {
        Self { n, rows: Spectral1D::new(n), spectrum: vec![Complex64::default(); n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Flat index into [`Spectral2D::spectrum`] for wavenumber bins `(k1, k2)`.
    #[inline]
    pub fn spectral_index(&self, k1: usize, k2: usize) -> usize {
        k2 * self.n + k1
    }

    /// Forward transform. `data` is used as workspace and left with its rows
    /// transformed; the full spectrum is available from [`Self::spectrum`].
    pub fn forward(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.rows.forward(data);
        transpose(data, &mut self.spectrum, self.n);
        self.rows.forward(&mut self.spectrum);
    }

    /// Forward transform leaving `data` untouched.
    pub fn forward_from(&mut self, data: &[Complex64]) {
        let mut work = data.to_vec();
        self.forward(&mut work);
    }

    /// Normalised inverse of the current spectrum, written into `data` as `[x1][x2]`.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        debug_assert_eq!(data.len(), self.n * self.n);
        self.rows.inverse_unnormalized(&mut self.spectrum);
        transpose(&self.spectrum, data, self.n);
        self.rows.inverse_unnormalized(data);
        let scale = 1.0 / (self.n * self.n) as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn spectrum_mut(&mut self) -> &mut [Complex64] {
        &mut self.spectrum
    }
}

/// Out-of-place transpose of a square row-major matrix.
pub fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn max_rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn one_d_roundtrip(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
            let orig: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let mut data = orig.clone();
            let mut fft = Spectral1D::new(64);
            fft.forward(&mut data);
            fft.inverse(&mut data);
            prop_assert!(max_rel_err(&data, &orig) < 1e-12);
        }

        #[test]
        fn two_d_roundtrip(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 256)) {
            let orig: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let mut data = orig.clone();
            let mut fft = Spectral2D::new(16);
            fft.forward(&mut data);
            fft.inverse(&mut data);
            prop_assert!(max_rel_err(&data, &orig) < 1e-12);
        }
    }

    #[test]
    fn spectrum_layout_is_transposed() {
        let n = 8;
        // plane wave e^{2 pi i (2 j1 + 3 j2)/n} has all weight in bin (k1=2, k2=3)
        let data: Vec<Complex64> = (0..n * n)
            .map(|idx| {
                let (j1, j2) = (idx / n, idx % n);
                let phase = 2.0 * std::f64::consts::PI * (2 * j1 + 3 * j2) as f64 / n as f64;
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        let mut fft = Spectral2D::new(n);
        let mut work = data.clone();
        fft.forward(&mut work);
        let peak = fft.spectral_index(2, 3);
        assert!((fft.spectrum()[peak].re - (n * n) as f64).abs() < 1e-9);
        let rest: f64 = fft
            .spectrum()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != peak)
            .map(|(_, z)| z.norm())
            .sum();
        assert!(rest < 1e-9);

        let mut fft2 = Spectral2D::new(n);
        fft2.forward_from(&data);
        assert!(max_rel_err(fft2.spectrum(), fft.spectrum()) < 1e-14);
    }
}
