//! Phase-space quasiprobabilities of the reduced one-particle states and of
//! the relative coordinate.
//!
//! The displacement `y` is sampled on the position grid, so the momentum grid
//! has `N` points spaced `pi/L` over `[-N pi/2L, N pi/2L)`. Displacements are
//! restricted to `|y| < L/4`: on a periodic grid the full range would pair
//! every lobe with a ghost copy half a box away whose sign alternates between
//! neighbouring momentum rows.

use faer::{c64, Mat};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::grid::{fft_index, Grid1D};
use crate::spectral::{Spectral1D, Spectral2D};
use crate::state::TwoBodyState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    One,
    Two,
}

/// Which centre-of-mass coordinate is traced out for the relative Wigner function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativeFrame {
    /// `X = (x1 + x2)/2` regardless of the masses.
    EqualMass,
    /// `X = (mu1 x1 + mu2 x2)/(mu1 + mu2)`.
    MassWeighted,
}

impl RelativeFrame {
    /// `(a, b)` in the inverse map `x1 = X + a r`, `x2 = X - b r`.
    pub fn weights(self, masses: (f64, f64)) -> (f64, f64) {
        match self {
            RelativeFrame::EqualMass => (0.5, 0.5),
            RelativeFrame::MassWeighted => {
                let total = masses.0 + masses.1;
                (masses.1 / total, masses.0 / total)
            }
        }
    }
}

/// Sampled `W(q, p)` indexed `[q][p]`, both axes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub values: Array2<f64>,
    pub coords: Vec<f64>,
    pub momenta: Vec<f64>,
    pub dq: f64,
    pub dp: f64,
}

impl WignerMap {
    pub fn total(&self) -> f64 {
        self.values.sum() * self.dq * self.dp
    }

    /// `int dp W(q, p)` at each coordinate sample.
    pub fn coordinate_marginal(&self) -> Vec<f64> {
        self.values.rows().into_iter().map(|row| row.sum() * self.dp).collect()
    }

    /// `int dq W(q, p)` at each momentum sample.
    pub fn momentum_marginal(&self) -> Vec<f64> {
        self.values.columns().into_iter().map(|col| col.sum() * self.dq).collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Momentum samples `p_s = (s - N/2) pi / L`.
pub fn momentum_grid(grid: &Grid1D) -> Vec<f64> {
    let n = grid.n() as isize;
    let dp = std::f64::consts::PI / grid.length();
    (0..n).map(|s| (s - n / 2) as f64 * dp).collect()
}

fn to_faer(data: &[Complex64], n: usize, transpose: bool) -> Mat<c64> {
    Mat::from_fn(n, n, |i, j| {
        let z = if transpose { data[j * n + i] } else { data[i * n + j] };
        c64::new(z.re, z.im)
    })
}

/// `rho(q, q') = sum_s M(q, s) M*(q', s) dx`.
fn density_kernel(m: &Mat<c64>, dx: f64) -> Array2<Complex64> {
    let rho = m * m.adjoint();
    let n = m.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let z = rho[(i, j)];
        Complex64::new(z.re * dx, z.im * dx)
    })
}

/// Wigner transform of a density kernel sampled on `grid`.
pub fn wigner_from_kernel(rho: &Array2<Complex64>, grid: &Grid1D) -> Result<WignerMap> {
    let n = grid.n();
    if rho.dim() != (n, n) {
        return Err(SimError::Shape(format!("density kernel is {:?}, grid needs ({n}, {n})", rho.dim())));
    }
    let dx = grid.dx();
    let window = (n / 4) as isize;
    let mut fft = Spectral1D::new(n);
    let mut line = vec![Complex64::default(); n];
    let mut values = Array2::<f64>::zeros((n, n));
    let ni = n as isize;
    for i in 0..n {
        for (j, f) in line.iter_mut().enumerate() {
            let m = fft_index(j, n);
            *f = if m.abs() < window {
                let a = (i as isize + m).rem_euclid(ni) as usize;
                let b = (i as isize - m).rem_euclid(ni) as usize;
                rho[[a, b]]
            } else {
                Complex64::default()
            };
        }
        fft.forward(&mut line);
        let mut row = values.row_mut(i);
        for s in 0..n {
            row[s] = line[(s + n / 2) % n].re * dx / std::f64::consts::PI;
        }
    }
    Ok(WignerMap { values, coords: grid.x().to_vec(), momenta: momentum_grid(grid), dq: dx, dp: std::f64::consts::PI / grid.length() })
}

/// Reduced density kernel of one particle.
pub fn reduced_density(state: &TwoBodyState, which: Particle) -> Array2<Complex64> {
    let n = state.grid.n();
    let m = to_faer(state.as_slice(), n, which == Particle::Two);
    density_kernel(&m, state.grid.dx())
}

pub fn wigner_reduced(state: &TwoBodyState, which: Particle) -> Result<WignerMap> {
    wigner_from_kernel(&reduced_density(state, which), &state.grid)
}

/// `G(r, X) = Psi(X + a r, X - b r)` sampled on the grid in both `r` and `X`.
///
/// Off-grid arguments are evaluated by exact Fourier translation. Rows of `r`
/// that share the same fractional cell offsets reuse one shifted copy.
pub fn relative_amplitude(state: &TwoBodyState, frame: RelativeFrame) -> Array2<Complex64> {
    let grid = &state.grid;
    let n = grid.n();
    let dx = grid.dx();
    let (a, b) = frame.weights(state.masses);

    let split = |v: f64| {
        let mut whole = v.floor();
        let mut frac = v - whole;
        if frac > 1.0 - 1e-9 {
            whole += 1.0;
            frac = 0.0;
        }
        (whole as isize, frac)
    };
    // rows sharing the same fractional shifts, as (row, whole shift 1, whole shift 2)
    type Group = ((f64, f64), Vec<(usize, isize, isize)>);
    let mut groups: Vec<Group> = Vec::new();
    for (ri, &r) in grid.x().iter().enumerate() {
        let (n1, f1) = split(a * r / dx);
        let (n2, f2) = split(-b * r / dx);
        let entry = (ri, n1, n2);
        match groups.iter_mut().find(|(f, _)| (f.0 - f1).abs() < 1e-9 && (f.1 - f2).abs() < 1e-9) {
            Some((_, rows)) => rows.push(entry),
            None => groups.push(((f1, f2), vec![entry])),
        }
    }

    let mut fft = Spectral2D::new(n);
    let mut work = state.as_slice().to_vec();
    fft.forward(&mut work);
    let original = fft.spectrum().to_vec();
    let k = grid.k();
    let shift_factors = |f: f64| -> Vec<Complex64> {
        k.iter()
            .enumerate()
            .map(|(i, &kv)| if i == n / 2 { Complex64::new((kv * f * dx).cos(), 0.0) } else { Complex64::from_polar(1.0, kv * f * dx) })
            .collect()
    };

    let ni = n as isize;
    let mut g = Array2::<Complex64>::zeros((n, n));
    let mut shifted = vec![Complex64::default(); n * n];
    for ((f1, f2), rows) in groups {
        let source: &[Complex64] = if f1 == 0.0 && f2 == 0.0 {
            state.as_slice()
        } else {
            let e1 = shift_factors(f1);
            let e2 = shift_factors(f2);
            let spec = fft.spectrum_mut();
            for (k2, f2) in e2.iter().enumerate() {
                for (k1, f1) in e1.iter().enumerate() {
                    let idx = k2 * n + k1;
                    spec[idx] = original[idx] * f1 * f2;
                }
            }
            fft.inverse(&mut shifted);
            &shifted
        };
        for (ri, n1, n2) in rows {
            let mut row = g.row_mut(ri);
            for xi in 0..ni {
                let i1 = (xi + n1).rem_euclid(ni) as usize;
                let i2 = (xi + n2).rem_euclid(ni) as usize;
                row[xi as usize] = source[i1 * n + i2];
            }
        }
    }
    g
}

/// Relative-coordinate density kernel `rho_rel(r, r') = int dX G(r, X) G*(r', X)`.
pub fn relative_density(state: &TwoBodyState, frame: RelativeFrame) -> Array2<Complex64> {
    let n = state.grid.n();
    let g = relative_amplitude(state, frame);
    let m = to_faer(g.as_slice().expect("row-major"), n, false);
    density_kernel(&m, state.grid.dx())
}

pub fn wigner_relative(state: &TwoBodyState, frame: RelativeFrame) -> Result<WignerMap> {
    wigner_from_kernel(&relative_density(state, frame), &state.grid)
}

/// `int dq dp |min(W, 0)|`.
pub fn wigner_negativity(w: &WignerMap) -> f64 {
    w.values.iter().map(|&v| (-v).max(0.0)).sum::<f64>() * w.dq * w.dp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_states::{assemble_state, gaussian_profile, AssembleConfig, InitialKind, ProfileSpec};
    use crate::potentials::{Couplings, KernelTable};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> Grid1D {
        Grid1D::new(256, 40.0).unwrap()
    }

    fn assembled(kind: InitialKind, masses: (f64, f64)) -> TwoBodyState {
        let g = grid();
        let k = KernelTable::new(&g, 0.2).unwrap();
        let cfg = AssembleConfig {
            kind,
            profile: ProfileSpec::Gaussian,
            r0: 6.0,
            sigma0: 1.0,
            masses,
            couplings: Couplings::new(1.0, 1.0).unwrap(),
        };
        assemble_state(&cfg, &g, &k).unwrap().state
    }

    fn cat_state(g: &Grid1D) -> TwoBodyState {
        let l = gaussian_profile(g, 1.0, -3.0).unwrap().amplitude;
        let r = gaussian_profile(g, 1.0, 3.0).unwrap().amplitude;
        let sup: Vec<Complex64> = l.iter().zip(&r).map(|(a, b)| a + b).collect();
        let other = gaussian_profile(g, 1.0, 0.0).unwrap().amplitude;
        let mut s = TwoBodyState::product(&sup, &other, g.clone(), (1.0, 1.0)).unwrap();
        s.normalize();
        s
    }

    fn momentum_density(amp: &[Complex64], dx: f64) -> Vec<f64> {
        let mut data = amp.to_vec();
        Spectral1D::new(amp.len()).forward(&mut data);
        data.iter().map(|z| z.norm_sqr() * dx * dx / (2.0 * std::f64::consts::PI)).collect()
    }

    #[test]
    fn gaussian_reduced_wigner_is_positive_and_consistent() {
        let s = assembled(InitialKind::I, (1.0, 1.0));
        let (rho1, rho2) = crate::diagnostics::marginals(&s);
        for (which, rho) in [(Particle::One, &rho1), (Particle::Two, &rho2)] {
            let w = wigner_reduced(&s, which).unwrap();
            assert!(w.min() >= -1e-10, "{}", w.min());
            assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-8);
            for (a, b) in w.coordinate_marginal().iter().zip(rho.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
            assert!(wigner_negativity(&w) < 1e-6);
        }
    }

    #[test]
    fn gaussian_wigner_peak_location() {
        let s = assembled(InitialKind::I, (1.0, 1.0));
        let w = wigner_reduced(&s, Particle::One).unwrap();
        let (mut best, mut at) = (f64::MIN, (0, 0));
        for ((i, j), &v) in w.values.indexed_iter() {
            if v > best {
                best = v;
                at = (i, j);
            }
        }
        assert!((w.coords[at.0] + 3.0).abs() <= 0.5 * s.grid.dx());
        assert_eq!(w.momenta[at.1], 0.0);
        // the continuum value at the peak is 1/pi
        assert_abs_diff_eq!(best, 1.0 / std::f64::consts::PI, epsilon = 1e-3);
    }

    #[test]
    fn momentum_marginal_matches_spectral_density() {
        let g = grid();
        let a = gaussian_profile(&g, 0.7, -2.0).unwrap();
        let b = gaussian_profile(&g, 1.0, 4.0).unwrap();
        // give particle 1 a mean momentum so the check is not symmetric in p
        let boosted: Vec<Complex64> =
            a.amplitude.iter().zip(g.x()).map(|(z, &x)| z * Complex64::from_polar(1.0, 1.3 * x)).collect();
        let s = TwoBodyState::product(&boosted, &b.amplitude, g.clone(), (1.0, 1.0)).unwrap();
        let w = wigner_reduced(&s, Particle::One).unwrap();
        let marginal = w.momentum_marginal();
        let n_k = momentum_density(&boosted, g.dx());
        let n = g.n();
        for s_idx in (0..n).step_by(2) {
            let q = (s_idx as isize - n as isize / 2) / 2;
            let bin = q.rem_euclid(n as isize) as usize;
            let alias = (bin + n / 2) % n;
            assert_abs_diff_eq!(marginal[s_idx], n_k[bin] + n_k[alias], epsilon = 1e-8);
        }
    }

    #[test]
    fn cat_state_has_fringes() {
        let g = grid();
        let s = cat_state(&g);
        let w = wigner_reduced(&s, Particle::One).unwrap();
        let neg = wigner_negativity(&w);
        assert!(neg > 0.1, "{neg}");
        assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-8);
        // fringes at x = 0 oscillate as cos(p R0): first minimum at p = pi/6
        let i0 = g.nearest_index(0.0);
        let row = w.values.row(i0);
        let p_min = std::f64::consts::PI / 6.0;
        let j = w.momenta.iter().position(|&p| (p - p_min).abs() < 0.5 * w.dp).unwrap();
        assert!(row[j] < 0.0);
        assert!(row[w.momenta.iter().position(|&p| p == 0.0).unwrap()] > 0.0);
        // continuum value from direct quadrature of the defining integral
        assert_abs_diff_eq!(neg, 0.2402, epsilon = 2e-3);
    }

    #[test]
    fn negativity_of_zero_map() {
        let w = WignerMap { values: Array2::zeros((4, 4)), coords: vec![0.0; 4], momenta: vec![0.0; 4], dq: 1.0, dp: 1.0 };
        assert_eq!(wigner_negativity(&w), 0.0);
    }

    #[test]
    fn relative_wigner_product_state() {
        let s = assembled(InitialKind::I, (1.0, 1.0));
        let w = wigner_relative(&s, RelativeFrame::EqualMass).unwrap();
        assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-4);
        assert!(wigner_negativity(&w) < 1e-3);
        let marg = w.coordinate_marginal();
        let peak = marg.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert!((w.coords[peak] + 6.0).abs() <= 0.5 * s.grid.dx());
        let rho = relative_density(&s, RelativeFrame::EqualMass);
        for (i, m) in marg.iter().enumerate() {
            assert_abs_diff_eq!(*m, rho[[i, i]].re, epsilon = 1e-4);
        }
    }

    #[test]
    fn relative_wigner_of_entangled_pair() {
        let s = assembled(InitialKind::IV, (1.0, 1.0));
        let w = wigner_relative(&s, RelativeFrame::EqualMass).unwrap();
        assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-4);
        assert!(wigner_negativity(&w) > 1e-2);
        let marg = w.coordinate_marginal();
        let at = |r: f64| marg[s.grid.nearest_index(r)];
        assert!(at(6.0) > 0.1 && at(-6.0) > 0.1);
        assert_abs_diff_eq!(at(6.0), at(-6.0), epsilon = 1e-8);
        assert!(at(0.0) < 1e-3 * at(6.0));
    }

    #[test]
    fn mass_weighted_frame_matches_equal_mass_path() {
        let s = assembled(InitialKind::IV, (1.0, 1.0));
        let a = wigner_relative(&s, RelativeFrame::EqualMass).unwrap();
        let b = wigner_relative(&s, RelativeFrame::MassWeighted).unwrap();
        let worst = a.values.iter().zip(b.values.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn mass_weighted_relative_density_is_normalised() {
        let s = assembled(InitialKind::I, (1.0, 3.0));
        assert_eq!(RelativeFrame::MassWeighted.weights(s.masses), (0.75, 0.25));
        let w = wigner_relative(&s, RelativeFrame::MassWeighted).unwrap();
        assert_abs_diff_eq!(w.total(), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn relative_amplitude_on_grid_rows_is_exact() {
        let s = assembled(InitialKind::III, (1.0, 1.0));
        let g = relative_amplitude(&s, RelativeFrame::EqualMass);
        let n = s.grid.n();
        // r index N/2 + 2 means r = 2 dx: x1 = X + dx, x2 = X - dx
        let ri = n / 2 + 2;
        for xi in 0..n {
            let want = s.psi[[(xi + 1) % n, (xi + n - 1) % n]];
            assert_eq!(g[[ri, xi]], want);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(6))]
        #[test]
        fn wigner_marginals_hold_for_random_superpositions(
            c in prop::collection::vec(-6.0f64..6.0, 4),
            w in prop::collection::vec(0.1f64..1.0, 2),
            phase in 0.0f64..std::f64::consts::TAU,
        ) {
            let g = Grid1D::new(128, 40.0).unwrap();
            let p = |x: f64| gaussian_profile(&g, 1.2, x).unwrap().amplitude;
            let (a1, b1, a2, b2) = (p(c[0]), p(c[1]), p(c[2]), p(c[3]));
            let n = g.n();
            let rot = Complex64::from_polar(w[1], phase);
            let psi = Array2::from_shape_fn((n, n), |(i, j)| a1[i] * b1[j] * w[0] + a2[i] * b2[j] * rot);
            let mut s = TwoBodyState::new(psi, g.clone(), (1.0, 1.0)).unwrap();
            s.normalize();
            let (rho1, _) = crate::diagnostics::marginals(&s);
            let wr = wigner_reduced(&s, Particle::One).unwrap();
            prop_assert!((wr.total() - 1.0).abs() < 1e-8);
            for (x, y) in wr.coordinate_marginal().iter().zip(&rho1) {
                prop_assert!((x - y).abs() < 1e-8);
            }
            let wrel = wigner_relative(&s, RelativeFrame::EqualMass).unwrap();
            prop_assert!((wrel.total() - 1.0).abs() < 1e-4);
        }
    }
}
