//! Single-scenario drivers: `run`, `compare-hartree` and `ground-state`.

use std::path::{Path, PathBuf};

use log::{debug, info};
use serde::Serialize;
use snpair_core::diagnostics::{record, DiagnosticsRecord, RecordOptions};
use snpair_core::hartree::{hartree_vs_full, marginal_distance, ComparisonRow, HartreePair, HartreeStepper};
use snpair_core::initial_states::{assemble_state, eigen_residual, ground_state_sn, AssembledState};
use snpair_core::wigner::wigner_relative;
use snpair_core::{KernelTable, Propagator, StepPlan, TwoBodyState};

use crate::config::{ScenarioConfig, Solver};
use crate::error::{CliError, Result};
use crate::io::{
    dump_name, ensure_dir, write_field, write_json, write_profile, write_real_field, RecordWriter, RunSummary,
    SpectrumWriter,
};

pub const SUMMARY_FILE: &str = "summary.json";
pub const COMPARISON_FILE: &str = "comparison.csv";
pub const SPECTRUM_FILE: &str = "schmidt_spectrum.csv";
pub const COMPARISON_HEADER: [&str; 6] = ["t", "S_vN_full", "S_vN_hartree", "L2_marginal_dist", "E_full", "E_hartree"];

/// Everything one solver produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub records: Vec<DiagnosticsRecord>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioArtifacts {
    pub full: Option<RunOutcome>,
    pub hartree: Option<RunOutcome>,
    pub comparison: Vec<ComparisonRow>,
}

enum Dynamics {
    Full { prop: Propagator, state: TwoBodyState },
    // the propagator only evaluates diagnostics on the embedded product
    Hartree { stepper: Box<HartreeStepper>, pair: HartreePair, prop: Propagator },
}

impl Dynamics {
    fn step(&mut self, t: f64) -> Result<()> {
        match self {
            Dynamics::Full { prop, state } => {
                prop.step(state)?;
                state.t = t;
            }
            Dynamics::Hartree { stepper, pair, .. } => {
                stepper.step(pair)?;
                pair.t = t;
            }
        }
        Ok(())
    }

    fn record(&mut self, opts: RecordOptions) -> Result<(DiagnosticsRecord, Option<TwoBodyState>)> {
        match self {
            Dynamics::Full { prop, state } => Ok((record(state, prop, opts)?, None)),
            Dynamics::Hartree { stepper, pair, prop } => {
                let embedded = pair.embed()?;
                let mut rec = record(&embedded, prop, opts)?;
                rec.energy = stepper.energy(pair)?;
                rec.norm = rec.energy.norm;
                Ok((rec, Some(embedded)))
            }
        }
    }
}

struct Track {
    name: &'static str,
    dir: PathBuf,
    dynamics: Dynamics,
    writer: RecordWriter,
    spectrum: Option<SpectrumWriter>,
    records: Vec<DiagnosticsRecord>,
    latest: Option<TwoBodyState>,
}

impl Track {
    fn new(name: &'static str, dir: PathBuf, dynamics: Dynamics, cfg: &ScenarioConfig) -> Result<Self> {
        ensure_dir(&dir)?;
        let writer = RecordWriter::create(&dir.join(&cfg.outputs.csv), cfg.outputs.negativity)?;
        let spectrum = if cfg.outputs.spectrum {
            Some(SpectrumWriter::create(&dir.join(SPECTRUM_FILE), cfg.grid.n)?)
        } else {
            None
        };
        Ok(Self { name, dir, dynamics, writer, spectrum, records: Vec::new(), latest: None })
    }

    fn sample(&mut self, opts: RecordOptions) -> Result<()> {
        let (rec, embedded) = self.dynamics.record(opts)?;
        self.writer.write(&rec)?;
        if let (Some(w), Some(s)) = (self.spectrum.as_mut(), rec.spectrum.as_ref()) {
            w.write(rec.t, s)?;
        }
        debug!("{} t = {:.3}: S_vN = {:.6}, E = {:.10}", self.name, rec.t, rec.s_vn, rec.energy.e_total);
        self.latest = embedded;
        self.records.push(rec);
        Ok(())
    }

    fn state(&self) -> &TwoBodyState {
        match &self.dynamics {
            Dynamics::Full { state, .. } => state,
            Dynamics::Hartree { .. } => self.latest.as_ref().expect("sampled before dumping"),
        }
    }

    fn dump(&mut self, cfg: &ScenarioConfig, t: f64) -> Result<()> {
        if let Dynamics::Hartree { pair, .. } = &self.dynamics {
            if self.latest.as_ref().map(|s| s.t) != Some(pair.t) {
                self.latest = Some(pair.embed()?);
            }
        }
        let state = self.state();
        let (n, l) = (state.grid.n(), state.grid.length());
        write_field(&self.dir.join(dump_name("psi", t)), n, l, t, state.as_slice())?;
        if cfg.outputs.wigner {
            let w = wigner_relative(state, cfg.relative_frame())?;
            write_real_field(&self.dir.join(dump_name("wrel", t)), n, l, t, w.values.iter().copied())?;
        }
        Ok(())
    }

    fn finish(self, cfg: &ScenarioConfig, assembled: &AssembledState) -> Result<RunOutcome> {
        self.writer.finish()?;
        if let Some(w) = self.spectrum {
            w.finish()?;
        }
        let mut summary = RunSummary::from_records(&self.records)
            .ok_or_else(|| CliError::Config("run produced no samples".into()))?;
        summary.solver = self.name.into();
        summary.kind = cfg.initial.kind.to_string();
        summary.profile = cfg.initial.profile.name().into();
        summary.masses = [cfg.masses.mu1, cfg.masses.mu2];
        summary.overlap = [assembled.overlap.0, assembled.overlap.1];
        summary.omegas = assembled.omegas.map(|(a, b)| [a, b]);
        summary.write(&self.dir.join(SUMMARY_FILE))?;
        info!(
            "{}: peak S_vN = {:.6} at t = {}, max energy drift {:.3e}",
            self.name, summary.peak_s_vn, summary.t_peak, summary.max_rel_energy_drift
        );
        Ok(RunOutcome { dir: self.dir, records: self.records, summary })
    }
}

/// Grid, plan and initial state shared by all drivers.
pub struct Prepared {
    pub plan: StepPlan,
    pub assembled: AssembledState,
}

pub fn prepare(cfg: &ScenarioConfig) -> Result<Prepared> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let plan = StepPlan::new(&grid, cfg.masses(), cfg.couplings()?, cfg.epsilon, cfg.time.dt)?;
    let assembled = assemble_state(&cfg.assemble_config()?, &grid, &plan.kernel)?;
    Ok(Prepared { plan, assembled })
}

fn write_comparison(path: &Path, rows: &[ComparisonRow]) -> Result<()> {
    let err = |e: csv::Error| CliError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(COMPARISON_HEADER).map_err(err)?;
    for r in rows {
        w.serialize([r.t, r.s_vn_full, r.s_vn_hartree, r.marginal_distance, r.e_full, r.e_hartree]).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Evolve the configured scenario and write its artifacts under `outputs.dir`.
///
/// With `solver = "both"` the full run lands in `dir`, the Hartree run in
/// `dir/hartree`, and their side-by-side comparison in `dir/comparison.csv`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioArtifacts> {
    let Prepared { plan, assembled } = prepare(cfg)?;
    let dir = cfg.outputs.dir.clone();
    ensure_dir(&dir)?;
    let opts = RecordOptions {
        full_spectrum: cfg.outputs.spectrum,
        negativity: cfg.outputs.negativity.then(|| cfg.relative_frame()),
    };
    let hartree_dynamics = || -> Result<Dynamics> {
        Ok(Dynamics::Hartree {
            stepper: Box::new(HartreeStepper::new(&plan.grid, plan.masses, plan.couplings, &plan.kernel, plan.dt)?),
            pair: HartreePair::from_product(&assembled.state)?,
            prop: Propagator::new(plan.clone()),
        })
    };
    let mut tracks = Vec::new();
    if cfg.solver != Solver::Hartree {
        let full = Dynamics::Full { prop: Propagator::new(plan.clone()), state: assembled.state.clone() };
        tracks.push(Track::new("full", dir.clone(), full, cfg)?);
    }
    match cfg.solver {
        Solver::Full => {}
        Solver::Hartree => tracks.push(Track::new("hartree", dir.clone(), hartree_dynamics()?, cfg)?),
        Solver::Both => tracks.push(Track::new("hartree", dir.join("hartree"), hartree_dynamics()?, cfg)?),
    }

    let n_steps = cfg.n_steps();
    let every = cfg.time.sample_every;
    let stride = cfg.dump_stride();
    let dt = cfg.time.dt;
    let mut comparison = Vec::new();
    info!("{} steps of dt = {dt}, kind {} ({})", n_steps, cfg.initial.kind, cfg.initial.profile.name());
    for s in 0..=n_steps {
        // recomputed from the step count so long runs accumulate no rounding
        let t = s as f64 * dt;
        if s > 0 {
            for tr in &mut tracks {
                tr.dynamics.step(t)?;
            }
        }
        if s % every == 0 || s == n_steps {
            for tr in &mut tracks {
                tr.sample(opts)?;
            }
            if let [full, hartree] = tracks.as_slice() {
                let (Dynamics::Full { state, .. }, Dynamics::Hartree { pair, .. }) = (&full.dynamics, &hartree.dynamics)
                else {
                    unreachable!("tracks are pushed full first");
                };
                let (f, h) = (full.records.last().expect("sampled"), hartree.records.last().expect("sampled"));
                comparison.push(ComparisonRow {
                    t,
                    s_vn_full: f.s_vn,
                    s_vn_hartree: h.s_vn,
                    marginal_distance: marginal_distance(state, pair),
                    e_full: f.energy.e_total,
                    e_hartree: h.energy.e_total,
                });
            }
        }
        if stride.is_some_and(|k| s % k == 0) {
            for tr in &mut tracks {
                tr.dump(cfg, t)?;
            }
        }
    }

    let mut out = ScenarioArtifacts::default();
    for tr in tracks {
        let name = tr.name;
        let outcome = tr.finish(cfg, &assembled)?;
        match name {
            "full" => out.full = Some(outcome),
            _ => out.hartree = Some(outcome),
        }
    }
    if cfg.solver == Solver::Both {
        write_comparison(&dir.join(COMPARISON_FILE), &comparison)?;
    }
    out.comparison = comparison;
    Ok(out)
}

/// Evolve a product state with the full and Hartree solvers and tabulate
/// the difference to `outputs.dir/comparison.csv`.
pub fn compare_hartree(cfg: &ScenarioConfig) -> Result<Vec<ComparisonRow>> {
    let Prepared { plan, assembled } = prepare(cfg)?;
    if !cfg.initial.kind.is_product() {
        return Err(CliError::Config(format!("compare-hartree needs a product state, got kind {}", cfg.initial.kind)));
    }
    ensure_dir(&cfg.outputs.dir)?;
    let mut prop = Propagator::new(plan);
    let rows = hartree_vs_full(&assembled.state, &mut prop, cfg.time.t_final, cfg.time.sample_every, |r| {
        debug!("t = {:.3}: S_vN full {:.6}, hartree {:.1e}", r.t, r.s_vn_full, r.s_vn_hartree);
    })?;
    write_comparison(&cfg.outputs.dir.join(COMPARISON_FILE), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundStateReport {
    pub mass: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub omega: f64,
    pub residual: f64,
    /// Standard deviation of `|phi|^2`.
    pub width: f64,
    pub file: String,
}

/// Solve for the stationary profile of each distinct mass and dump it.
pub fn ground_state(cfg: &ScenarioConfig) -> Result<Vec<GroundStateReport>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let kernel = KernelTable::new(&grid, cfg.epsilon)?;
    let kappa = cfg.couplings.kappa;
    ensure_dir(&cfg.outputs.dir)?;
    let mut masses = vec![cfg.masses.mu1];
    if cfg.masses.mu2 != cfg.masses.mu1 {
        masses.push(cfg.masses.mu2);
    }
    let mut reports = Vec::new();
    for mass in masses {
        let (profile, omega) =
            ground_state_sn(&grid, mass, kappa, &kernel, cfg.initial.sigma0, cfg.ground_state_options())?;
        let (_, residual) = eigen_residual(&profile.amplitude, &grid, mass, kappa, &kernel)?;
        let dx = grid.dx();
        let rho = profile.density();
        let mean: f64 = rho.iter().zip(grid.x()).map(|(r, x)| r * x).sum::<f64>() * dx;
        let var: f64 = rho.iter().zip(grid.x()).map(|(r, x)| r * (x - mean).powi(2)).sum::<f64>() * dx;
        let file = format!("ground_state_mu{mass}.sn1b");
        write_profile(&cfg.outputs.dir.join(&file), grid.length(), 0.0, &profile.amplitude)?;
        info!("mu = {mass}: omega = {omega:.10}, residual {residual:.2e}");
        reports.push(GroundStateReport { mass, kappa, epsilon: cfg.epsilon, omega, residual, width: var.sqrt(), file });
    }
    write_json(&cfg.outputs.dir.join("ground_state.json"), &reports)?;
    Ok(reports)
}
