//! Real-time Strang split-step evolution of the two-body state.
//!
//! Each step is potential(dt/2) - kinetic(dt) - potential(dt/2). The
//! self-potentials are rebuilt from the marginals at the start of each
//! potential substep and held fixed within it; the pair phase is static and
//! precomputed.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::grid::Grid1D;
use crate::potentials::{pair_potential_grid, Convolver, Couplings, KernelTable};
use crate::spectral::Spectral2D;
use crate::state::TwoBodyState;

/// Maximum tolerated `|norm - 1|` before a step is declared unstable.
pub const NORM_BLOWUP: f64 = 1e-6;

/// Precomputed operators for a fixed time step.
#[derive(Debug, Clone)]
pub struct StepPlan {
    pub dt: f64,
    pub grid: Grid1D,
    pub masses: (f64, f64),
    pub couplings: Couplings,
    pub kernel: KernelTable,
    /// `V_pair(x1, x2)`, indexed `[x1][x2]`.
    pub pair_field: Array2<f64>,
    /// `k1^2/2mu1 + k2^2/2mu2` in the transposed spectral layout `[k2][k1]`.
    kinetic_energy: Vec<f64>,
    /// `exp(-i dt T)` in the same layout.
    kinetic_phase: Vec<Complex64>,
    /// `exp(-i dt/2 V_pair)`, indexed `[x1][x2]`.
    pair_phase: Vec<Complex64>,
}

impl StepPlan {
    pub fn new(grid: &Grid1D, masses: (f64, f64), couplings: Couplings, epsilon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        for (name, m) in [("mu1", masses.0), ("mu2", masses.1)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(SimError::InvalidParameter(format!("{name} = {m} must be positive")));
            }
        }
        let kernel = KernelTable::new(grid, epsilon)?;
        let pair_field = pair_potential_grid(grid, masses, couplings.gamma, &kernel);
        let n = grid.n();
        let k = grid.k();
        let mut kinetic_energy = vec![0.0; n * n];
        for (k2i, k2) in k.iter().enumerate() {
            for (k1i, k1) in k.iter().enumerate() {
                kinetic_energy[k2i * n + k1i] = k1 * k1 / (2.0 * masses.0) + k2 * k2 / (2.0 * masses.1);
            }
        }
        let kinetic_phase = kinetic_energy.iter().map(|&e| Complex64::from_polar(1.0, -dt * e)).collect();
        let pair_phase = pair_field.iter().map(|&v| Complex64::from_polar(1.0, -0.5 * dt * v)).collect();
        Ok(Self { dt, grid: grid.clone(), masses, couplings, kernel, pair_field, kinetic_energy, kinetic_phase, pair_phase })
    }

    pub fn kinetic_phase(&self) -> &[Complex64] {
        &self.kinetic_phase
    }
}

/// Energy functional split into its terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub e_kin: f64,
    pub e_pair: f64,
    pub e_self1: f64,
    pub e_self2: f64,
    pub e_total: f64,
    pub norm: f64,
}

impl EnergyBreakdown {
    pub fn new(e_kin: f64, e_pair: f64, e_self1: f64, e_self2: f64, norm: f64) -> Self {
        Self { e_kin, e_pair, e_self1, e_self2, e_total: e_kin + e_pair + e_self1 + e_self2, norm }
    }
}

/// Step plan plus the scratch buffers a running evolution needs.
#[derive(Debug, Clone)]
pub struct Propagator {
    plan: StepPlan,
    fft: Spectral2D,
    conv: Convolver,
    rho1: Vec<f64>,
    rho2: Vec<f64>,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    phase1: Vec<Complex64>,
    phase2: Vec<Complex64>,
}

/// `rho1(x1) = sum_x2 |psi|^2 dx` and `rho2(x2) = sum_x1 |psi|^2 dx` into the given buffers.
pub(crate) fn marginals_into(psi: &[Complex64], n: usize, dx: f64, rho1: &mut [f64], rho2: &mut [f64]) {
    rho2.iter_mut().for_each(|r| *r = 0.0);
    for (i, row) in psi.chunks_exact(n).enumerate() {
        let mut acc = 0.0;
        for (r2, z) in rho2.iter_mut().zip(row) {
            let p = z.norm_sqr();
            acc += p;
            *r2 += p;
        }
        rho1[i] = acc * dx;
    }
    rho2.iter_mut().for_each(|r| *r *= dx);
}

impl Propagator {
    pub fn new(plan: StepPlan) -> Self {
        let n = plan.grid.n();
        let conv = plan.kernel.convolver();
        Self {
            fft: Spectral2D::new(n),
            conv,
            rho1: vec![0.0; n],
            rho2: vec![0.0; n],
            phi1: vec![0.0; n],
            phi2: vec![0.0; n],
            phase1: vec![Complex64::default(); n],
            phase2: vec![Complex64::default(); n],
            plan,
        }
    }

    pub fn plan(&self) -> &StepPlan {
        &self.plan
    }

    fn check_state(&self, state: &TwoBodyState) -> Result<()> {
        if state.grid.n() != self.plan.grid.n() || state.grid.length() != self.plan.grid.length() {
            return Err(SimError::Shape("state grid differs from the step plan".into()));
        }
        if state.masses != self.plan.masses {
            return Err(SimError::InvalidParameter("state masses differ from the step plan".into()));
        }
        Ok(())
    }

    /// Rebuild marginals and self-potentials from `psi`; returns the norm.
    fn refresh_fields(&mut self, psi: &[Complex64]) -> Result<f64> {
        let n = self.plan.grid.n();
        let dx = self.plan.grid.dx();
        marginals_into(psi, n, dx, &mut self.rho1, &mut self.rho2);
        self.conv.convolve(&self.rho1, self.plan.masses.0, &mut self.phi1)?;
        self.conv.convolve(&self.rho2, self.plan.masses.1, &mut self.phi2)?;
        Ok(self.rho1.iter().sum::<f64>() * dx)
    }

    /// `psi *= exp[i dt/2 (kappa mu1 Phi1 + kappa mu2 Phi2 + gamma mu1 mu2 U)]`.
    fn potential_half_step(&mut self, psi: &mut [Complex64]) -> Result<f64> {
        let norm = self.refresh_fields(psi)?;
        let n = self.plan.grid.n();
        let half = 0.5 * self.plan.dt;
        let (mu1, mu2) = self.plan.masses;
        let kappa = self.plan.couplings.kappa;
        for (p, phi) in self.phase1.iter_mut().zip(&self.phi1) {
            *p = Complex64::from_polar(1.0, half * kappa * mu1 * phi);
        }
        for (p, phi) in self.phase2.iter_mut().zip(&self.phi2) {
            *p = Complex64::from_polar(1.0, half * kappa * mu2 * phi);
        }
        for ((row, pair), a) in psi.chunks_exact_mut(n).zip(self.plan.pair_phase.chunks_exact(n)).zip(&self.phase1) {
            for ((z, pp), b) in row.iter_mut().zip(pair).zip(&self.phase2) {
                *z *= a * pp * b;
            }
        }
        Ok(norm)
    }

    /// Advance `state` by one step `dt`.
    pub fn step(&mut self, state: &mut TwoBodyState) -> Result<()> {
        self.check_state(state)?;
        let psi = state.psi.as_slice_mut().expect("row-major amplitude");
        self.potential_half_step(psi)?;
        self.fft.forward(psi);
        for (z, k) in self.fft.spectrum_mut().iter_mut().zip(&self.plan.kinetic_phase) {
            *z *= k;
        }
        self.fft.inverse(psi);
        let norm = self.potential_half_step(psi)?;
        state.t += self.plan.dt;
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_BLOWUP {
            return Err(SimError::NormBlowup { norm, t: state.t });
        }
        Ok(())
    }

    /// Energy functional with the halved self-energy terms.
    pub fn energy(&mut self, state: &TwoBodyState) -> Result<EnergyBreakdown> {
        self.check_state(state)?;
        let n = self.plan.grid.n();
        let dx = self.plan.grid.dx();
        let psi = state.as_slice();
        let norm = self.refresh_fields(psi)?;

        self.fft.forward_from(psi);
        let spectral_weight = dx * dx / (n * n) as f64;
        let e_kin = self
            .fft
            .spectrum()
            .iter()
            .zip(&self.plan.kinetic_energy)
            .map(|(z, t)| z.norm_sqr() * t)
            .sum::<f64>()
            * spectral_weight;
        let e_pair = psi.iter().zip(self.plan.pair_field.iter()).map(|(z, v)| z.norm_sqr() * v).sum::<f64>() * dx * dx;
        let kappa = self.plan.couplings.kappa;
        let (mu1, mu2) = self.plan.masses;
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx;
        let e_self1 = -0.5 * kappa * mu1 * dot(&self.rho1, &self.phi1);
        let e_self2 = -0.5 * kappa * mu2 * dot(&self.rho2, &self.phi2);
        Ok(EnergyBreakdown::new(e_kin, e_pair, e_self1, e_self2, norm))
    }

    /// Run `n_steps` steps, calling `sink` at step 0, every `sample_every`
    /// steps and after the last step.
    ///
    /// Time is recomputed as `t0 + step * dt` so long runs accumulate no
    /// rounding in `t`.
    pub fn evolve<F>(&mut self, state: &mut TwoBodyState, t_final: f64, sample_every: usize, mut sink: F) -> Result<()>
    where
        F: FnMut(&TwoBodyState, &mut Propagator) -> Result<()>,
    {
        let n_steps = steps_for(t_final, self.plan.dt)?;
        if sample_every == 0 {
            return Err(SimError::InvalidParameter("sample cadence must be >= 1".into()));
        }
        let t0 = state.t;
        sink(state, self)?;
        for s in 1..=n_steps {
            self.step(state)?;
            state.t = t0 + s as f64 * self.plan.dt;
            if s % sample_every == 0 || s == n_steps {
                sink(state, self)?;
            }
        }
        Ok(())
    }
}

/// Number of steps of size `dt` covering `t_final`, which must be a whole multiple.
pub fn steps_for(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(SimError::InvalidParameter(format!("t_final = {t_final} must be positive")));
    }
    let steps = (t_final / dt).round();
    if (steps * dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(SimError::InvalidParameter(format!("t_final = {t_final} is not a multiple of dt = {dt}")));
    }
    Ok(steps as usize)
}
