//! Two-body Schrödinger–Newton dynamics on a periodic 1D grid.
//!
//! Two particles evolve under their own Newtonian self-potentials (sourced by
//! the marginal densities) and a softened pair potential that couples them
//! directly. The pair term is what lets gravity entangle them; everything in
//! [`diagnostics`] and [`wigner`] exists to measure that.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod hartree;
pub mod initial_states;
pub mod potentials;
pub mod propagator;
pub mod spectral;
pub mod state;
pub mod wigner;

pub use error::{Result, SimError};
pub use grid::Grid1D;
pub use potentials::{Couplings, KernelTable};
pub use propagator::{EnergyBreakdown, Propagator, StepPlan};
pub use state::TwoBodyState;
