//! Single-particle profiles and the four two-body initial configurations.
//!
//! Stationary profiles come from imaginary-time Strang propagation of the
//! single-particle Schrodinger-Newton equation. A finite imaginary step
//! converges to the fixed point of the split map rather than the exact
//! eigenstate (they differ at `O(dtau^2)`), so the step is halved whenever the
//! eigen-residual stops improving.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, Side};
use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::grid::{periodic_min_distance, Grid1D};
use crate::potentials::{Couplings, KernelTable};
use crate::spectral::Spectral1D;
use crate::state::TwoBodyState;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileKind {
    Gaussian { sigma0: f64 },
    StationarySn { seed_sigma: f64, omega: f64 },
}

/// Normalised single-particle amplitude.
#[derive(Debug, Clone)]
pub struct SingleProfile {
    pub amplitude: Vec<Complex64>,
    pub kind: ProfileKind,
    pub center: f64,
    pub mass: f64,
}

impl SingleProfile {
    pub fn norm_sqr(&self, dx: f64) -> f64 {
        self.amplitude.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
    }

    pub fn density(&self) -> Vec<f64> {
        self.amplitude.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Rigidly translate by `shift` using an exact spectral phase ramp.
    pub fn translated(&self, grid: &Grid1D, shift: f64) -> Self {
        let mut amp = self.amplitude.clone();
        let mut fft = Spectral1D::new(grid.n());
        fft.forward(&mut amp);
        for (a, &k) in amp.iter_mut().zip(grid.k()) {
            *a *= Complex64::from_polar(1.0, -k * shift);
        }
        fft.inverse(&mut amp);
        Self { amplitude: amp, kind: self.kind, center: self.center + shift, mass: self.mass }
    }
}

fn normalize(amp: &mut [Complex64], dx: f64) {
    let norm = (amp.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx).sqrt();
    amp.iter_mut().for_each(|z| *z /= norm);
}

/// `phi(x) ~ exp[-(x - center)^2 / (4 sigma0^2)]`, normalised on the grid.
pub fn gaussian_profile(grid: &Grid1D, sigma0: f64, center: f64) -> Result<SingleProfile> {
    if !(sigma0.is_finite() && sigma0 > 0.0) {
        return Err(SimError::InvalidParameter(format!("sigma0 = {sigma0} must be positive")));
    }
    if sigma0 < 2.0 * grid.dx() {
        return Err(SimError::InvalidParameter(format!(
            "sigma0 = {sigma0} is unresolved on a grid with dx = {}",
            grid.dx()
        )));
    }
    let half = 0.5 * grid.length();
    if !(center >= -half && center < half) {
        return Err(SimError::InvalidParameter(format!("center {center} outside [-{half}, {half})")));
    }
    let mut amp: Vec<Complex64> = grid
        .x()
        .iter()
        .map(|&x| {
            let d = periodic_min_distance(x - center, grid.length());
            Complex64::new((-d * d / (4.0 * sigma0 * sigma0)).exp(), 0.0)
        })
        .collect();
    normalize(&mut amp, grid.dx());
    Ok(SingleProfile { amplitude: amp, kind: ProfileKind::Gaussian { sigma0 }, center, mass: 1.0 })
}

/// Tuning of the imaginary-time solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundStateOptions {
    pub dtau: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between residual evaluations.
    pub check_every: usize,
}

impl Default for GroundStateOptions {
    fn default() -> Self {
        Self { dtau: 0.01, tol: 1e-8, max_iter: 100_000, check_every: 25 }
    }
}

/// Applies the single-particle SN Hamiltonian `H[|phi|^2]` on a grid.
struct SnOperator<'a> {
    grid: &'a Grid1D,
    mass: f64,
    kappa: f64,
    kernel: &'a KernelTable,
    fft: Spectral1D,
}

impl<'a> SnOperator<'a> {
    fn new(grid: &'a Grid1D, mass: f64, kappa: f64, kernel: &'a KernelTable) -> Self {
        Self { grid, mass, kappa, kernel, fft: Spectral1D::new(grid.n()) }
    }

    /// `-kappa mu Phi(x)`, where `Phi` already carries one factor `mu`.
    fn potential(&self, amp: &[Complex64]) -> Result<Vec<f64>> {
        let rho: Vec<f64> = amp.iter().map(|z| z.norm_sqr()).collect();
        self.potential_of(&rho)
    }

    fn potential_of(&self, rho: &[f64]) -> Result<Vec<f64>> {
        let mut phi = vec![0.0; rho.len()];
        self.kernel.convolver().convolve(rho, self.mass, &mut phi)?;
        Ok(phi.into_iter().map(|p| -self.kappa * self.mass * p).collect())
    }

    fn apply(&mut self, amp: &[Complex64]) -> Result<Vec<Complex64>> {
        let v = self.potential(amp)?;
        let mut kin = amp.to_vec();
        self.fft.forward(&mut kin);
        for (z, &k) in kin.iter_mut().zip(self.grid.k()) {
            *z *= k * k / (2.0 * self.mass);
        }
        self.fft.inverse(&mut kin);
        Ok(kin.iter().zip(amp).zip(&v).map(|((t, a), v)| t + a * v).collect())
    }

    /// Rayleigh quotient and `||H phi - omega phi||_2` for a normalised `phi`.
    fn residual(&mut self, amp: &[Complex64]) -> Result<(f64, f64)> {
        let dx = self.grid.dx();
        let h = self.apply(amp)?;
        let omega = amp.iter().zip(&h).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * dx;
        let res = (h.iter().zip(amp).map(|(b, a)| (b - a * omega).norm_sqr()).sum::<f64>() * dx).sqrt();
        Ok((omega, res))
    }
}

/// Eigenvalue estimate and eigen-residual of a normalised profile.
pub fn eigen_residual(
    profile: &[Complex64],
    grid: &Grid1D,
    mass: f64,
    kappa: f64,
    kernel: &KernelTable,
) -> Result<(f64, f64)> {
    SnOperator::new(grid, mass, kappa, kernel).residual(profile)
}

fn variance(amp: &[Complex64], grid: &Grid1D) -> f64 {
    let dx = grid.dx();
    let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (z, &x) in amp.iter().zip(grid.x()) {
        let w = z.norm_sqr() * dx;
        m0 += w;
        m1 += w * x;
        m2 += w * x * x;
    }
    m2 / m0 - (m1 / m0).powi(2)
}

/// Rotate the global phase so the peak amplitude is real and positive.
fn fix_phase(amp: &mut [Complex64]) {
    let peak = amp
        .iter()
        .copied()
        .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
        .unwrap_or_default();
    if peak.norm() > 0.0 {
        let rot = peak.conj() / peak.norm();
        amp.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Solve `omega phi = H[|phi|^2] phi` for the self-bound ground state,
/// starting from a centred Gaussian of width `seed_sigma`.
pub fn ground_state_sn(
    grid: &Grid1D,
    mass: f64,
    kappa: f64,
    kernel: &KernelTable,
    seed_sigma: f64,
    opts: GroundStateOptions,
) -> Result<(SingleProfile, f64)> {
    let seed = gaussian_profile(grid, seed_sigma, 0.0)?;
    ground_state_from_seed(grid, mass, kappa, kernel, seed.amplitude, seed_sigma, opts)
}

/// As [`ground_state_sn`] but from an arbitrary seed amplitude.
pub fn ground_state_from_seed(
    grid: &Grid1D,
    mass: f64,
    kappa: f64,
    kernel: &KernelTable,
    seed: Vec<Complex64>,
    seed_sigma: f64,
    opts: GroundStateOptions,
) -> Result<(SingleProfile, f64)> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(SimError::InvalidParameter(format!("mass {mass} must be positive")));
    }
    if kappa * mass * mass <= 0.0 {
        return Err(SimError::NoBoundState(format!("kappa mu^2 = {}", kappa * mass * mass)));
    }
    if !(opts.dtau > 0.0 && opts.tol > 0.0) {
        return Err(SimError::InvalidParameter("dtau and tol must be positive".into()));
    }
    let dx = grid.dx();
    let mut op = SnOperator::new(grid, mass, kappa, kernel);
    let mut fft = Spectral1D::new(grid.n());
    let mut amp = seed;
    normalize(&mut amp, dx);

    let finish = |mut amp: Vec<Complex64>, omega: f64| -> Result<(SingleProfile, f64)> {
        fix_phase(&mut amp);
        let imag = amp.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > 1e-10 {
            log::warn!("stationary profile keeps an imaginary part of {imag:e} after phase fixing");
        }
        let profile = SingleProfile {
            amplitude: amp,
            kind: ProfileKind::StationarySn { seed_sigma, omega },
            center: 0.0,
            mass,
        };
        Ok((profile, omega))
    };

    let (omega, mut residual) = op.residual(&amp)?;
    if residual < opts.tol {
        return finish(amp, omega);
    }

    let dtau = opts.dtau;
    let kin: Vec<f64> = grid.k().iter().map(|&k| (-dtau * k * k / (2.0 * mass)).exp()).collect();
    let mut best = residual;
    let mut stalled_checks = 0usize;
    let mut last_var = variance(&amp, grid);
    let mut growing = 0usize;
    let broad = grid.length() * grid.length() / 64.0;
    let mut used = 0usize;

    while used < opts.max_iter {
        used += 1;
        // half potential, full kinetic, half potential; Phi from the current density
        let v = op.potential(&amp)?;
        for (a, v) in amp.iter_mut().zip(&v) {
            *a *= (-0.5 * dtau * v).exp();
        }
        normalize(&mut amp, dx);
        fft.forward(&mut amp);
        for (a, k) in amp.iter_mut().zip(&kin) {
            *a *= k;
        }
        fft.inverse(&mut amp);
        normalize(&mut amp, dx);
        let v = op.potential(&amp)?;
        for (a, v) in amp.iter_mut().zip(&v) {
            *a *= (-0.5 * dtau * v).exp();
        }
        normalize(&mut amp, dx);

        if !used.is_multiple_of(opts.check_every) {
            continue;
        }
        let (omega, r) = op.residual(&amp)?;
        residual = r;
        if residual < opts.tol {
            log::debug!("ground state converged after {used} imaginary-time steps (omega = {omega})");
            return finish(amp, omega);
        }

        let var = variance(&amp, grid);
        growing = if var > last_var { growing + 1 } else { 0 };
        last_var = var;
        if growing >= 40 && var > broad {
            return Err(SimError::NoBoundState(format!(
                "profile keeps spreading (variance {var:.3} on a box of length {})",
                grid.length()
            )));
        }

        if residual < 0.99 * best {
            best = residual;
            stalled_checks = 0;
        } else {
            stalled_checks += 1;
        }
        if stalled_checks >= 8 {
            break;
        }
    }

    // The split map has converged to its own fixed point, which is O(dtau^2)
    // away from the true eigenstate. Finish with self-consistent iterations on
    // the unsplit Hamiltonian.
    log::debug!("imaginary time stalled at residual {residual:e} after {used} steps; polishing");
    let (amp, omega, residual, scf_iters) = scf_polish(&mut op, amp, opts.tol, opts.max_iter.saturating_sub(used))?;
    if residual < opts.tol {
        log::debug!("ground state converged after {scf_iters} self-consistent iterations (omega = {omega})");
        return finish(amp, omega);
    }
    Err(SimError::NonConvergence { residual, iterations: used + scf_iters })
}

/// Self-consistent field iteration: diagonalise `H[rho]` exactly, mix the new
/// density into the old one, repeat. Returns `(amp, omega, residual, iterations)`.
fn scf_polish(
    op: &mut SnOperator<'_>,
    mut amp: Vec<Complex64>,
    tol: f64,
    budget: usize,
) -> Result<(Vec<Complex64>, f64, f64, usize)> {
    const MIX: f64 = 0.5;
    let grid = op.grid;
    let n = grid.n();
    let dx = grid.dx();

    let mut stencil: Vec<Complex64> = grid.k().iter().map(|&k| Complex64::new(k * k / (2.0 * op.mass), 0.0)).collect();
    op.fft.inverse(&mut stencil);
    let kinetic = Mat::<f64>::from_fn(n, n, |i, j| stencil[(i + n - j) % n].re);

    let mut rho: Vec<f64> = amp.iter().map(|z| z.norm_sqr()).collect();
    let (mut omega, mut residual) = op.residual(&amp)?;
    let mut iters = 0;
    while iters < budget.min(500) {
        iters += 1;
        let v = op.potential_of(&rho)?;
        let mut h = kinetic.clone();
        for (i, vi) in v.iter().enumerate() {
            h[(i, i)] += vi;
        }
        let eig = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| SimError::NonConvergence { residual, iterations: iters })?;
        let values = eig.S().column_vector();
        let lowest = (0..n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
        let u = eig.U().col(lowest);
        let mut next: Vec<Complex64> = (0..n).map(|i| Complex64::new(u[i], 0.0)).collect();
        normalize(&mut next, dx);
        fix_phase(&mut next);
        amp = next;
        (omega, residual) = op.residual(&amp)?;
        if residual < tol {
            break;
        }
        for (r, z) in rho.iter_mut().zip(&amp) {
            *r = (1.0 - MIX) * *r + MIX * z.norm_sqr();
        }
    }
    Ok((amp, omega, residual, iters))
}

/// Which of the four two-body configurations to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitialKind {
    /// `phi_L(x1) phi_R(x2)`.
    I,
    /// `(phi_L + phi_R)(x1) (phi_L + phi_R)(x2)`.
    II,
    /// `phi_L phi_L + phi_R phi_R`.
    III,
    /// `phi_L phi_R + phi_R phi_L`.
    IV,
}

impl InitialKind {
    pub const ALL: [InitialKind; 4] = [InitialKind::I, InitialKind::II, InitialKind::III, InitialKind::IV];

    pub fn is_product(self) -> bool {
        matches!(self, InitialKind::I | InitialKind::II)
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InitialKind::I => "I",
            InitialKind::II => "II",
            InitialKind::III => "III",
            InitialKind::IV => "IV",
        };
        f.write_str(s)
    }
}

impl FromStr for InitialKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(InitialKind::I),
            "II" | "2" => Ok(InitialKind::II),
            "III" | "3" => Ok(InitialKind::III),
            "IV" | "4" => Ok(InitialKind::IV),
            other => Err(SimError::InvalidParameter(format!("unknown initial kind '{other}'"))),
        }
    }
}

/// Shape used for each single-particle component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileSpec {
    Gaussian,
    Stationary(GroundStateOptions),
}

/// Everything needed to build a two-body initial state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssembleConfig {
    pub kind: InitialKind,
    pub profile: ProfileSpec,
    pub r0: f64,
    pub sigma0: f64,
    pub masses: (f64, f64),
    pub couplings: Couplings,
}

/// Assembled state plus the grid overlaps `s_i = <phi_L|phi_R>` of each particle.
#[derive(Debug, Clone)]
pub struct AssembledState {
    pub state: TwoBodyState,
    pub overlap: (f64, f64),
    /// Eigenvalues of the stationary profiles, when used.
    pub omegas: Option<(f64, f64)>,
}

impl AssembledState {
    /// Overlap of particle 1's components; equal to particle 2's for equal masses.
    pub fn s(&self) -> f64 {
        self.overlap.0
    }
}

/// The left/right components of one particle.
fn components(
    grid: &Grid1D,
    kernel: &KernelTable,
    cfg: &AssembleConfig,
    mass: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>, Option<f64>)> {
    let half = 0.5 * cfg.r0;
    match cfg.profile {
        ProfileSpec::Gaussian => {
            let l = gaussian_profile(grid, cfg.sigma0, -half)?;
            let r = gaussian_profile(grid, cfg.sigma0, half)?;
            Ok((l.amplitude, r.amplitude, None))
        }
        ProfileSpec::Stationary(opts) => {
            let (base, omega) = ground_state_sn(grid, mass, cfg.couplings.kappa, kernel, cfg.sigma0, opts)?;
            let l = base.translated(grid, -half);
            let r = base.translated(grid, half);
            Ok((l.amplitude, r.amplitude, Some(omega)))
        }
    }
}

fn overlap(a: &[Complex64], b: &[Complex64], dx: f64) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * dx
}

/// Build one of the four configurations and renormalise it on the grid.
pub fn assemble_state(cfg: &AssembleConfig, grid: &Grid1D, kernel: &KernelTable) -> Result<AssembledState> {
    if !(cfg.r0.is_finite() && cfg.r0 >= 0.0) {
        return Err(SimError::InvalidParameter(format!("R0 = {} must be non-negative", cfg.r0)));
    }
    if cfg.r0 >= 0.5 * grid.length() {
        return Err(SimError::InvalidParameter(format!(
            "R0 = {} >= L/2 = {}: components would wrap around the box",
            cfg.r0,
            0.5 * grid.length()
        )));
    }
    let dx = grid.dx();
    let (l1, r1, w1) = components(grid, kernel, cfg, cfg.masses.0)?;
    let (l2, r2, w2) = if cfg.masses.0 == cfg.masses.1 {
        (l1.clone(), r1.clone(), w1)
    } else {
        components(grid, kernel, cfg, cfg.masses.1)?
    };
    let s1 = overlap(&l1, &r1, dx).re;
    let s2 = overlap(&l2, &r2, dx).re;
    let s = s1;

    let n = grid.n();
    let psi = match cfg.kind {
        InitialKind::I => Array2::from_shape_fn((n, n), |(i, j)| l1[i] * r2[j]),
        InitialKind::II => {
            let norm = 1.0 / (4.0 * (1.0 + s).powi(2)).sqrt();
            Array2::from_shape_fn((n, n), |(i, j)| (l1[i] + r1[i]) * (l2[j] + r2[j]) * norm)
        }
        InitialKind::III => {
            let norm = 1.0 / (2.0 + 2.0 * s * s).sqrt();
            Array2::from_shape_fn((n, n), |(i, j)| (l1[i] * l2[j] + r1[i] * r2[j]) * norm)
        }
        InitialKind::IV => {
            let norm = 1.0 / (2.0 + 2.0 * s * s).sqrt();
            Array2::from_shape_fn((n, n), |(i, j)| (l1[i] * r2[j] + r1[i] * l2[j]) * norm)
        }
    };
    let mut state = TwoBodyState::new(psi, grid.clone(), cfg.masses)?;
    state.normalize();
    let omegas = match (w1, w2) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    Ok(AssembledState { state, overlap: (s1, s2), omegas })
}

/// Closed-form Schmidt eigenvalues `(1 +- s)^2 / [2 (1 + s^2)]` of the
/// superposition states for overlap `s`.
pub fn superposition_eigenvalues(s: f64) -> (f64, f64) {
    let d = 2.0 * (1.0 + s * s);
    ((1.0 + s).powi(2) / d, (1.0 - s).powi(2) / d)
}
