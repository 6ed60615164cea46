//! Mean-field (Hartree) reduction: each particle keeps its own orbital and
//! sees the other only through its density.
//!
//! The pair stays a product state by construction, so it cannot become
//! entangled; comparing it with the full evolution isolates what the
//! nonseparable pair term does.

use num_complex::Complex64;

use crate::diagnostics::{entropies, marginals, schmidt, EIGENVALUE_FLOOR, PRODUCT_STATE_TOL};
use crate::error::{Result, SimError};
use crate::grid::Grid1D;
use crate::potentials::{Convolver, Couplings, KernelTable};
use crate::propagator::{EnergyBreakdown, Propagator, NORM_BLOWUP};
use crate::spectral::Spectral1D;
use crate::state::TwoBodyState;

/// Product ansatz `psi1(x1) psi2(x2)` with both gauge constants fixed to zero.
#[derive(Debug, Clone)]
pub struct HartreePair {
    pub psi1: Vec<Complex64>,
    pub psi2: Vec<Complex64>,
    pub grid: Grid1D,
    pub masses: (f64, f64),
    pub t: f64,
}

fn norm_sqr(psi: &[Complex64], dx: f64) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx
}

fn normalize(psi: &mut [Complex64], dx: f64) -> f64 {
    let norm = norm_sqr(psi, dx);
    let scale = 1.0 / norm.sqrt();
    psi.iter_mut().for_each(|z| *z *= scale);
    norm
}

fn density(psi: &[Complex64]) -> Vec<f64> {
    psi.iter().map(|z| z.norm_sqr()).collect()
}

impl HartreePair {
    pub fn new(psi1: Vec<Complex64>, psi2: Vec<Complex64>, grid: Grid1D, masses: (f64, f64)) -> Result<Self> {
        let n = grid.n();
        if psi1.len() != n || psi2.len() != n {
            return Err(SimError::Shape("factor length does not match grid".into()));
        }
        for (name, m) in [("mu1", masses.0), ("mu2", masses.1)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(SimError::InvalidParameter(format!("{name} = {m} must be positive")));
            }
        }
        let mut pair = Self { psi1, psi2, grid, masses, t: 0.0 };
        let dx = pair.grid.dx();
        for psi in [&mut pair.psi1, &mut pair.psi2] {
            let norm = normalize(psi, dx);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(SimError::InvalidParameter("factor has zero or non-finite norm".into()));
            }
        }
        Ok(pair)
    }

    /// Factor a product two-body state. The global phase is not preserved.
    pub fn from_product(state: &TwoBodyState) -> Result<Self> {
        let lambda2 = schmidt(state, EIGENVALUE_FLOOR)?.lambda(1);
        if lambda2 >= PRODUCT_STATE_TOL {
            return Err(SimError::NotProductState { lambda2 });
        }
        let n = state.grid.n();
        let psi = state.as_slice();
        let (mut best, mut at) = (0.0, (0, 0));
        for (idx, z) in psi.iter().enumerate() {
            if z.norm_sqr() > best {
                best = z.norm_sqr();
                at = (idx / n, idx % n);
            }
        }
        let psi1: Vec<Complex64> = (0..n).map(|i| psi[i * n + at.1]).collect();
        let psi2 = psi[at.0 * n..(at.0 + 1) * n].to_vec();
        let mut pair = Self::new(psi1, psi2, state.grid.clone(), state.masses)?;
        pair.t = state.t;
        Ok(pair)
    }

    pub fn densities(&self) -> (Vec<f64>, Vec<f64>) {
        (density(&self.psi1), density(&self.psi2))
    }

    /// The pair as a rank-one two-body amplitude.
    pub fn embed(&self) -> Result<TwoBodyState> {
        let mut state = TwoBodyState::product(&self.psi1, &self.psi2, self.grid.clone(), self.masses)?;
        state.t = self.t;
        Ok(state)
    }
}

/// Operators and scratch for stepping a [`HartreePair`].
#[derive(Debug, Clone)]
pub struct HartreeStepper {
    dt: f64,
    couplings: Couplings,
    masses: (f64, f64),
    grid: Grid1D,
    fft: Spectral1D,
    conv: Convolver,
    kinetic: (Vec<f64>, Vec<f64>),
    kinetic_phase: (Vec<Complex64>, Vec<Complex64>),
    self1: Vec<f64>,
    self2: Vec<f64>,
    cross1: Vec<f64>,
    cross2: Vec<f64>,
}

impl HartreeStepper {
    pub fn new(grid: &Grid1D, masses: (f64, f64), couplings: Couplings, kernel: &KernelTable, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SimError::InvalidParameter(format!("dt = {dt} must be positive")));
        }
        if kernel.n() != grid.n() {
            return Err(SimError::Shape("kernel table built for another grid".into()));
        }
        let n = grid.n();
        let kin = |m: f64| grid.k().iter().map(|k| k * k / (2.0 * m)).collect::<Vec<f64>>();
        let kinetic = (kin(masses.0), kin(masses.1));
        let phase = |t: &[f64]| t.iter().map(|&e| Complex64::from_polar(1.0, -dt * e)).collect::<Vec<_>>();
        let kinetic_phase = (phase(&kinetic.0), phase(&kinetic.1));
        Ok(Self {
            dt,
            couplings,
            masses,
            grid: grid.clone(),
            fft: Spectral1D::new(n),
            conv: kernel.convolver(),
            kinetic,
            kinetic_phase,
            self1: vec![0.0; n],
            self2: vec![0.0; n],
            cross1: vec![0.0; n],
            cross2: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn check(&self, pair: &HartreePair) -> Result<()> {
        if pair.grid.n() != self.grid.n() || pair.grid.length() != self.grid.length() {
            return Err(SimError::Shape("pair grid differs from the stepper".into()));
        }
        if pair.masses != self.masses {
            return Err(SimError::InvalidParameter("pair masses differ from the stepper".into()));
        }
        Ok(())
    }

    /// Self-potentials `conv(U, mu_i rho_i)` and cross-potentials `conv(U, rho_j)`.
    fn refresh(&mut self, pair: &HartreePair) -> Result<()> {
        let (r1, r2) = pair.densities();
        self.conv.convolve(&r1, self.masses.0, &mut self.self1)?;
        self.conv.convolve(&r2, self.masses.1, &mut self.self2)?;
        self.conv.convolve(&r2, 1.0, &mut self.cross1)?;
        self.conv.convolve(&r1, 1.0, &mut self.cross2)?;
        Ok(())
    }

    /// Both factors see potentials built from the same densities.
    fn potential_half_step(&mut self, pair: &mut HartreePair) -> Result<()> {
        self.refresh(pair)?;
        let half = 0.5 * self.dt;
        let (mu1, mu2) = self.masses;
        let Couplings { kappa, gamma } = self.couplings;
        let dx = self.grid.dx();
        for (z, (s, c)) in pair.psi1.iter_mut().zip(self.self1.iter().zip(&self.cross1)) {
            *z *= Complex64::from_polar(1.0, half * (kappa * mu1 * s + gamma * mu1 * mu2 * c));
        }
        for (z, (s, c)) in pair.psi2.iter_mut().zip(self.self2.iter().zip(&self.cross2)) {
            *z *= Complex64::from_polar(1.0, half * (kappa * mu2 * s + gamma * mu1 * mu2 * c));
        }
        normalize(&mut pair.psi1, dx);
        normalize(&mut pair.psi2, dx);
        Ok(())
    }

    fn kinetic_step(&mut self, pair: &mut HartreePair) {
        let dx = self.grid.dx();
        for (psi, phase) in [(&mut pair.psi1, &self.kinetic_phase.0), (&mut pair.psi2, &self.kinetic_phase.1)] {
            self.fft.forward(psi);
            psi.iter_mut().zip(phase).for_each(|(z, p)| *z *= p);
            self.fft.inverse(psi);
            normalize(psi, dx);
        }
    }

    pub fn step(&mut self, pair: &mut HartreePair) -> Result<()> {
        self.check(pair)?;
        let dx = self.grid.dx();
        let before = (norm_sqr(&pair.psi1, dx), norm_sqr(&pair.psi2, dx));
        for norm in [before.0, before.1] {
            if !norm.is_finite() || (norm - 1.0).abs() > NORM_BLOWUP {
                return Err(SimError::NormBlowup { norm, t: pair.t });
            }
        }
        self.potential_half_step(pair)?;
        self.kinetic_step(pair);
        self.potential_half_step(pair)?;
        pair.t += self.dt;
        Ok(())
    }

    /// `E1[psi1] + E2[psi2] + E_pair[psi1, psi2]`.
    pub fn energy(&mut self, pair: &HartreePair) -> Result<EnergyBreakdown> {
        self.check(pair)?;
        self.refresh(pair)?;
        let n = self.grid.n();
        let dx = self.grid.dx();
        let kinetic = |fft: &mut Spectral1D, psi: &[Complex64], t: &[f64]| {
            let mut buf = psi.to_vec();
            fft.forward(&mut buf);
            buf.iter().zip(t).map(|(z, e)| z.norm_sqr() * e).sum::<f64>() * dx / n as f64
        };
        let e_kin = kinetic(&mut self.fft, &pair.psi1, &self.kinetic.0) + kinetic(&mut self.fft, &pair.psi2, &self.kinetic.1);
        let (r1, r2) = pair.densities();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * dx;
        let (mu1, mu2) = self.masses;
        let Couplings { kappa, gamma } = self.couplings;
        let e_self1 = -0.5 * kappa * mu1 * dot(&r1, &self.self1);
        let e_self2 = -0.5 * kappa * mu2 * dot(&r2, &self.self2);
        let e_pair = -gamma * mu1 * mu2 * dot(&r1, &self.cross1);
        let norm = norm_sqr(&pair.psi1, dx) * norm_sqr(&pair.psi2, dx);
        Ok(EnergyBreakdown::new(e_kin, e_pair, e_self1, e_self2, norm))
    }
}

/// One sample of the mean-field versus full-model comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub s_vn_full: f64,
    pub s_vn_hartree: f64,
    /// `sqrt(int (rho1 - |psi1|^2)^2 + (rho2 - |psi2|^2)^2 dx)`.
    pub marginal_distance: f64,
    pub e_full: f64,
    pub e_hartree: f64,
}

/// L2 distance between the full-model marginals and the Hartree densities.
pub fn marginal_distance(full: &TwoBodyState, pair: &HartreePair) -> f64 {
    let (f1, f2) = marginals(full);
    let (h1, h2) = pair.densities();
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    ((sq(&f1, &h1) + sq(&f2, &h2)) * full.grid.dx()).sqrt()
}

/// Evolve a product state with both solvers side by side.
///
/// `sink` receives every row as it is produced.
pub fn hartree_vs_full<F>(
    initial: &TwoBodyState,
    propagator: &mut Propagator,
    t_final: f64,
    sample_every: usize,
    mut sink: F,
) -> Result<Vec<ComparisonRow>>
where
    F: FnMut(&ComparisonRow),
{
    let plan = propagator.plan();
    let mut hartree = HartreeStepper::new(&plan.grid, plan.masses, plan.couplings, &plan.kernel, plan.dt)?;
    let mut pair = HartreePair::from_product(initial)?;
    let mut full = initial.clone();
    let mut rows = Vec::new();
    let mut sample = |full: &TwoBodyState, pair: &HartreePair, prop: &mut Propagator, hartree: &mut HartreeStepper| -> Result<()> {
        let (s_vn_full, _) = entropies(&schmidt(full, EIGENVALUE_FLOOR)?);
        let (s_vn_hartree, _) = entropies(&schmidt(&pair.embed()?, EIGENVALUE_FLOOR)?);
        let row = ComparisonRow {
            t: full.t,
            s_vn_full,
            s_vn_hartree,
            marginal_distance: marginal_distance(full, pair),
            e_full: prop.energy(full)?.e_total,
            e_hartree: hartree.energy(pair)?.e_total,
        };
        sink(&row);
        rows.push(row);
        Ok(())
    };
    let n_steps = crate::propagator::steps_for(t_final, hartree.dt())?;
    if sample_every == 0 {
        return Err(SimError::InvalidParameter("sample cadence must be >= 1".into()));
    }
    let t0 = full.t;
    sample(&full, &pair, propagator, &mut hartree)?;
    for s in 1..=n_steps {
        propagator.step(&mut full)?;
        hartree.step(&mut pair)?;
        let t = t0 + s as f64 * hartree.dt();
        full.t = t;
        pair.t = t;
        if s % sample_every == 0 || s == n_steps {
            sample(&full, &pair, propagator, &mut hartree)?;
        }
    }
    Ok(rows)
}
