//! Grid, domain and time-step refinement study.

use log::info;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, peak_entropy, write_json};
use crate::run::run_scenario;

pub const CONVERGENCE_FILE: &str = "convergence.csv";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Refinement {
    pub name: String,
    pub n: usize,
    pub length: f64,
    pub dt: f64,
    pub peak_s_vn: f64,
    pub t_peak: f64,
    pub final_dx_mean: f64,
    pub final_d_rel: f64,
    /// `|peak S_vN - baseline|`; zero for the baseline itself.
    pub delta_peak: f64,
    /// `|final dx_mean - baseline|`.
    pub delta_separation: f64,
}

/// The three refined variants of `cfg`: doubled `N`; `L` and `N` scaled by
/// 3/2 so the spacing is unchanged; halved `dt` sampled at the same times.
pub fn refinements(cfg: &ScenarioConfig) -> Vec<(String, ScenarioConfig)> {
    let base_dir = cfg.outputs.dir.clone();
    let mut fine_n = cfg.clone();
    fine_n.grid.n = 2 * cfg.grid.n;
    let mut wide = cfg.clone();
    wide.grid.l = 1.5 * cfg.grid.l;
    wide.grid.n = 2 * ((3 * cfg.grid.n).div_ceil(4));
    let mut fine_dt = cfg.clone();
    fine_dt.time.dt = 0.5 * cfg.time.dt;
    fine_dt.time.sample_every = 2 * cfg.time.sample_every;
    let mut out = vec![
        (format!("N={}", fine_n.grid.n), fine_n),
        (format!("L={}", wide.grid.l), wide),
        (format!("dt={}", fine_dt.time.dt), fine_dt),
    ];
    for (name, c) in &mut out {
        c.outputs.dir = base_dir.join(name.replace('=', "_"));
    }
    out
}

/// Rerun `cfg` under each refinement and report the shifts in peak entropy
/// and final mean separation.
pub fn run_convergence(cfg: &ScenarioConfig) -> Result<Vec<Refinement>> {
    cfg.validate()?;
    ensure_dir(&cfg.outputs.dir)?;
    let mut base = cfg.clone();
    base.outputs.dir = cfg.outputs.dir.join("baseline");
    let mut runs = vec![("baseline".to_string(), base)];
    runs.extend(refinements(cfg));

    let mut report: Vec<Refinement> = Vec::new();
    for (name, c) in runs {
        info!("convergence run {name}");
        let art = run_scenario(&c)?;
        let run = art.full.or(art.hartree).ok_or_else(|| CliError::Config("run produced no samples".into()))?;
        let (peak_s_vn, t_peak) = peak_entropy(&run.records, f64::INFINITY).expect("non-empty run");
        let mut row = Refinement {
            name,
            n: c.grid.n,
            length: c.grid.l,
            dt: c.time.dt,
            peak_s_vn,
            t_peak,
            final_dx_mean: run.summary.final_dx_mean,
            final_d_rel: run.summary.final_d_rel,
            delta_peak: 0.0,
            delta_separation: 0.0,
        };
        if let Some(b) = report.first() {
            row.delta_peak = (row.peak_s_vn - b.peak_s_vn).abs();
            row.delta_separation = (row.final_dx_mean - b.final_dx_mean).abs();
        }
        report.push(row);
    }

    let path = cfg.outputs.dir.join(CONVERGENCE_FILE);
    let err = |e: csv::Error| CliError::format(&path, e.to_string());
    let mut w = csv::Writer::from_path(&path).map_err(err)?;
    for r in &report {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    write_json(&cfg.outputs.dir.join("convergence.json"), &report)?;
    Ok(report)
}
