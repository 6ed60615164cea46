//! Observables evaluated on snapshots of the two-body state.

use faer::{c64, Mat};

use crate::error::{Result, SimError};
use crate::potentials::residual_interaction;
use crate::propagator::{marginals_into, EnergyBreakdown, Propagator};
use crate::state::TwoBodyState;
use crate::wigner::{wigner_negativity, wigner_reduced, wigner_relative, Particle, RelativeFrame};

use ndarray::Array2;

/// Schmidt eigenvalues below this floor are left out of entropy sums.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Largest second Schmidt eigenvalue still treated as a product state.
pub const PRODUCT_STATE_TOL: f64 = 1e-12;

/// Marginal densities `(rho1, rho2)`.
pub fn marginals(state: &TwoBodyState) -> (Vec<f64>, Vec<f64>) {
    let n = state.grid.n();
    let mut rho1 = vec![0.0; n];
    let mut rho2 = vec![0.0; n];
    marginals_into(state.as_slice(), n, state.grid.dx(), &mut rho1, &mut rho2);
    (rho1, rho2)
}

/// Descending Schmidt eigenvalues `lambda_k = s_k^2` of `Psi dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtSpectrum {
    eigenvalues: Vec<f64>,
    threshold: f64,
}

impl SchmidtSpectrum {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, threshold: f64) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self { eigenvalues, threshold }
    }

    /// All eigenvalues, including those under the floor.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of eigenvalues at or above the floor.
    pub fn retained(&self) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l >= self.threshold).count()
    }

    /// `lambda_k` (zero past the end).
    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues.get(k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

pub fn schmidt(state: &TwoBodyState, threshold: f64) -> Result<SchmidtSpectrum> {
    let n = state.grid.n();
    let dx = state.grid.dx();
    let psi = state.as_slice();
    if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SimError::Svd("amplitude has non-finite entries".into()));
    }
    let m = Mat::<c64>::from_fn(n, n, |i, j| {
        let z = psi[i * n + j];
        c64::new(z.re * dx, z.im * dx)
    });
    let sv = m.singular_values().map_err(|e| SimError::Svd(format!("{e:?}")))?;
    Ok(SchmidtSpectrum::from_eigenvalues(sv.into_iter().map(|s| s * s).collect(), threshold))
}

/// Von Neumann and linear entanglement entropies `(S_vN, S_L)`.
///
/// Eigenvalues are divided by their sum first, so a rank-one state gives
/// exactly zero rather than rounding noise.
pub fn entropies(spectrum: &SchmidtSpectrum) -> (f64, f64) {
    let total = spectrum.total();
    if total.is_nan() || total <= 0.0 {
        return (0.0, 0.0);
    }
    let mut s_vn = 0.0;
    let mut purity = 0.0;
    for l in spectrum.eigenvalues().iter().map(|l| l / total) {
        purity += l * l;
        if l >= spectrum.threshold() {
            s_vn -= l * l.ln();
        }
    }
    (s_vn.max(0.0), (1.0 - purity).max(0.0))
}

/// The two equivalent expressions for the `t^2` coefficient of `S_L(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTimeCoefficient {
    /// `2 <V_res^2>_12`.
    pub residual_form: f64,
    /// `2 [V_12(V) - V_1(<V>_2) - V_2(<V>_1)]`.
    pub variance_form: f64,
}

impl ShortTimeCoefficient {
    pub fn value(&self) -> f64 {
        self.residual_form
    }
}

/// Short-time growth rate of the linear entropy for a product state.
pub fn short_time_coefficient(state: &TwoBodyState, pair_field: &Array2<f64>) -> Result<ShortTimeCoefficient> {
    let spec = schmidt(state, EIGENVALUE_FLOOR)?;
    let lambda2 = spec.lambda(1);
    if lambda2 >= PRODUCT_STATE_TOL {
        return Err(SimError::NotProductState { lambda2 });
    }
    let dx = state.grid.dx();
    let (rho1, rho2) = marginals(state);
    let res = residual_interaction(pair_field, &rho1, &rho2, dx);
    let n = state.grid.n();

    let mut res_sq = 0.0;
    let mut v_sq = 0.0;
    for i in 0..n {
        let mut row_res = 0.0;
        let mut row_v = 0.0;
        for j in 0..n {
            row_res += rho2[j] * res.v_res[[i, j]].powi(2);
            row_v += rho2[j] * pair_field[[i, j]].powi(2);
        }
        res_sq += rho1[i] * row_res;
        v_sq += rho1[i] * row_v;
    }
    res_sq *= dx * dx;
    v_sq *= dx * dx;

    let mean = res.mean12;
    let var12 = v_sq - mean * mean;
    let second = |partial: &[f64], rho: &[f64]| -> f64 {
        let m1 = partial.iter().zip(rho).map(|(p, r)| p * r).sum::<f64>() * dx;
        let m2 = partial.iter().zip(rho).map(|(p, r)| p * p * r).sum::<f64>() * dx;
        m2 - m1 * m1
    };
    let var1 = second(&res.partial2, &rho1);
    let var2 = second(&res.partial1, &rho2);
    Ok(ShortTimeCoefficient { residual_form: 2.0 * res_sq, variance_form: 2.0 * (var12 - var1 - var2) })
}

/// `(Delta x_mean, D_rel)`: marginal centre separation and rms relative distance.
pub fn separations(state: &TwoBodyState) -> (f64, f64) {
    let dx = state.grid.dx();
    let x = state.grid.x();
    let (rho1, rho2) = marginals(state);
    let mean = |rho: &[f64]| rho.iter().zip(x).map(|(r, x)| r * x).sum::<f64>() * dx;
    let dx_mean = (mean(&rho1) - mean(&rho2)).abs();
    let n = state.grid.n();
    let psi = state.as_slice();
    let mut acc = 0.0;
    for (i, row) in psi.chunks_exact(n).enumerate() {
        let mut row_acc = 0.0;
        for (z, xj) in row.iter().zip(x) {
            row_acc += z.norm_sqr() * (x[i] - xj).powi(2);
        }
        acc += row_acc;
    }
    (dx_mean, (acc * dx * dx).sqrt())
}

/// `PR = [int rho^2 dx]^-1`.
pub fn participation_ratio(rho: &[f64], dx: f64) -> f64 {
    1.0 / (rho.iter().map(|r| r * r).sum::<f64>() * dx)
}

/// Wigner negativities of both reduced states and of the relative coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Negativity {
    pub neg1: f64,
    pub neg2: f64,
    pub neg_rel: f64,
}

pub fn negativities(state: &TwoBodyState, frame: RelativeFrame) -> Result<Negativity> {
    Ok(Negativity {
        neg1: wigner_negativity(&wigner_reduced(state, Particle::One)?),
        neg2: wigner_negativity(&wigner_reduced(state, Particle::Two)?),
        neg_rel: wigner_negativity(&wigner_relative(state, frame)?),
    })
}

/// One time sample of every tracked observable.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub s_vn: f64,
    pub s_l: f64,
    pub lambdas: [f64; 3],
    pub spectrum: Option<Vec<f64>>,
    pub energy: EnergyBreakdown,
    pub norm: f64,
    pub dx_mean: f64,
    pub d_rel: f64,
    pub pr1: f64,
    pub pr2: f64,
    pub negativity: Option<Negativity>,
}

impl DiagnosticsRecord {
    /// Check the record's internal invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SimError::InvalidParameter(format!("record at t = {}: {what}", self.t)));
        if self.s_vn.is_nan() || self.s_vn < 0.0 {
            return bad("S_vN < 0");
        }
        if !(self.s_l >= 0.0 && self.s_l < 1.0) {
            return bad("S_L outside [0, 1)");
        }
        if !(self.lambdas[0] >= self.lambdas[1] && self.lambdas[1] >= self.lambdas[2]) {
            return bad("Schmidt eigenvalues not descending");
        }
        let values = [self.norm, self.energy.e_total, self.dx_mean, self.d_rel, self.pr1, self.pr2];
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite observable");
        }
        Ok(())
    }
}

/// What an evaluation of [`record`] should include.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RecordOptions {
    pub full_spectrum: bool,
    /// Compute Wigner negativities in the given relative frame.
    pub negativity: Option<RelativeFrame>,
}

pub fn record(state: &TwoBodyState, propagator: &mut Propagator, opts: RecordOptions) -> Result<DiagnosticsRecord> {
    let spectrum = schmidt(state, EIGENVALUE_FLOOR)?;
    let (s_vn, s_l) = entropies(&spectrum);
    let energy = propagator.energy(state)?;
    let (dx_mean, d_rel) = separations(state);
    let (rho1, rho2) = marginals(state);
    let dx = state.grid.dx();
    let negativity = match opts.negativity {
        Some(frame) => Some(negativities(state, frame)?),
        None => None,
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        s_vn,
        s_l,
        lambdas: [spectrum.lambda(0), spectrum.lambda(1), spectrum.lambda(2)],
        spectrum: opts.full_spectrum.then(|| spectrum.eigenvalues().to_vec()),
        energy,
        norm: energy.norm,
        dx_mean,
        d_rel,
        pr1: participation_ratio(&rho1, dx),
        pr2: participation_ratio(&rho2, dx),
        negativity,
    })
}
