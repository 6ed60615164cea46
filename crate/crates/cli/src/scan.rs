//! Mass-ratio scans.

use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Profile, ScanConfig};
use crate::error::{CliError, Result};
use crate::io::{ensure_dir, peak_entropy};
use crate::run::run_scenario;

pub const SCAN_SUMMARY_FILE: &str = "scan_summary.csv";
pub const WORKERS_ENV: &str = "SNPAIR_WORKERS";

/// Worker-pool width requested through the environment.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub peak_s_vn: f64,
    pub t_peak: f64,
    /// Largest participation ratio of the lighter particle in the window.
    pub peak_pr2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub profile: Profile,
    pub ratio: f64,
    pub masses: (f64, f64),
    pub outcome: std::result::Result<PointResult, String>,
}

fn run_point(scan: &ScanConfig, profile: Profile, ratio: f64) -> ScanPoint {
    let cfg = scan.point(ratio, profile);
    let outcome = run_scenario(&cfg).map_err(|e| e.to_string()).and_then(|art| {
        let run = art.full.or(art.hartree).ok_or_else(|| "no samples".to_string())?;
        let (peak_s_vn, t_peak) = peak_entropy(&run.records, scan.peak_window).ok_or("empty window")?;
        let peak_pr2 = run
            .records
            .iter()
            .filter(|r| r.t <= scan.peak_window + 1e-9)
            .map(|r| r.pr2)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(PointResult { peak_s_vn, t_peak, peak_pr2 })
    });
    match &outcome {
        Ok(r) => info!("{} ratio {ratio}: peak S_vN {:.4} at t = {}", profile.name(), r.peak_s_vn, r.t_peak),
        Err(e) => warn!("{} ratio {ratio} failed: {e}", profile.name()),
    }
    ScanPoint { profile, ratio, masses: cfg.masses(), outcome }
}

/// Run every (profile, ratio) point and write the aggregated table.
///
/// A failing point is recorded in the table and does not stop the scan.
/// Results come back profile-major in configuration order whatever the
/// pool width.
pub fn run_scan(scan: &ScanConfig, workers: Option<usize>) -> Result<Vec<ScanPoint>> {
    scan.validate()?;
    let dir = &scan.base.outputs.dir;
    ensure_dir(dir)?;
    let jobs: Vec<(Profile, f64)> =
        scan.profiles.iter().flat_map(|&p| scan.ratios.iter().map(move |&r| (p, r))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let points: Vec<ScanPoint> = pool.install(|| jobs.par_iter().map(|&(p, r)| run_point(scan, p, r)).collect());
    write_scan_summary(&dir.join(SCAN_SUMMARY_FILE), &points)?;
    Ok(points)
}

fn write_scan_summary(path: &Path, points: &[ScanPoint]) -> Result<()> {
    let err = |e: csv::Error| CliError::format(path, e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["profile", "ratio", "mu1", "mu2", "peak_S_vN", "t_peak", "peak_PR2", "status"]).map_err(err)?;
    for p in points {
        let head = [p.profile.name().to_string(), p.ratio.to_string(), p.masses.0.to_string(), p.masses.1.to_string()];
        let tail = match &p.outcome {
            Ok(r) => [r.peak_s_vn.to_string(), r.t_peak.to_string(), r.peak_pr2.to_string(), "ok".to_string()],
            Err(e) => [String::new(), String::new(), String::new(), format!("failed: {e}")],
        };
        w.write_record(head.iter().chain(&tail)).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
