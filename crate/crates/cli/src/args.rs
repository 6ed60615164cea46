//! Command-line overrides layered on top of a config file.

use std::path::PathBuf;

use clap::Args;
use snpair_core::initial_states::InitialKind;

use crate::config::{Frame, Profile, ScanConfig, ScenarioConfig, Solver};
use crate::error::Result;

fn parse_kind(s: &str) -> std::result::Result<InitialKind, String> {
    s.parse().map_err(|e: snpair_core::SimError| e.to_string())
}

/// Flags mirroring the scenario file; any given flag wins over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// TOML file to start from (defaults to the equal-mass baseline).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "L", allow_negative_numbers = true)]
    pub l: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub epsilon: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    /// Initial configuration: I, II, III or IV.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<InitialKind>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long = "R0", allow_negative_numbers = true)]
    pub r0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub dt: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub sample_every: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Diagnostics file name inside the output directory.
    #[arg(long)]
    pub csv: Option<String>,
    /// Time between field dumps; 0 disables them.
    #[arg(long, allow_negative_numbers = true)]
    pub field_dump_interval: Option<f64>,
    #[arg(long)]
    pub wigner: Option<bool>,
    #[arg(long)]
    pub negativity: Option<bool>,
    #[arg(long)]
    pub spectrum: Option<bool>,
    #[arg(long, value_enum)]
    pub relative_frame: Option<Frame>,
    #[arg(long, value_enum)]
    pub solver: Option<Solver>,
}

macro_rules! set {
    ($flag:expr => $field:expr) => {
        if let Some(v) = $flag.clone() {
            $field = v;
        }
    };
}

impl ScenarioArgs {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        set!(self.n => cfg.grid.n);
        set!(self.l => cfg.grid.l);
        set!(self.epsilon => cfg.epsilon);
        set!(self.mu1 => cfg.masses.mu1);
        set!(self.mu2 => cfg.masses.mu2);
        set!(self.kappa => cfg.couplings.kappa);
        set!(self.gamma => cfg.couplings.gamma);
        set!(self.kind => cfg.initial.kind);
        set!(self.profile => cfg.initial.profile);
        set!(self.r0 => cfg.initial.r0);
        set!(self.sigma0 => cfg.initial.sigma0);
        set!(self.dt => cfg.time.dt);
        set!(self.t_final => cfg.time.t_final);
        set!(self.sample_every => cfg.time.sample_every);
        set!(self.out => cfg.outputs.dir);
        set!(self.csv => cfg.outputs.csv);
        set!(self.field_dump_interval => cfg.outputs.field_dump_interval);
        set!(self.wigner => cfg.outputs.wigner);
        set!(self.negativity => cfg.outputs.negativity);
        set!(self.spectrum => cfg.outputs.spectrum);
        set!(self.relative_frame => cfg.outputs.relative_frame);
        set!(self.solver => cfg.solver);
    }

    /// The config file (or baseline) with the flags applied, validated.
    pub fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScanArgs {
    /// Scan TOML file; scenario flags then override its `[base]`.
    #[command(flatten)]
    pub base: ScenarioArgs,
    /// Comma-separated mass ratios mu1/mu2.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_enum)]
    pub profiles: Option<Vec<Profile>>,
    #[arg(long, allow_negative_numbers = true)]
    pub peak_window: Option<f64>,
}

impl ScanArgs {
    pub fn scan(&self) -> Result<ScanConfig> {
        let mut scan = match &self.base.config {
            Some(path) => ScanConfig::load(path)?,
            None => ScanConfig::default(),
        };
        self.base.apply(&mut scan.base);
        set!(self.ratios => scan.ratios);
        set!(self.profiles => scan.profiles);
        set!(self.peak_window => scan.peak_window);
        scan.validate()?;
        Ok(scan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    #[test]
    fn flags_override_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "epsilon = 0.3\n[time]\ndt = 0.01\nt_final = 2.0\nsample_every = 5\n").unwrap();
        let args = ScenarioArgs {
            config: Some(path),
            gamma: Some(0.0),
            kind: Some(InitialKind::II),
            field_dump_interval: Some(0.0),
            ..Default::default()
        };
        let cfg = args.scenario().unwrap();
        assert_eq!(cfg.epsilon, 0.3);
        assert_eq!(cfg.couplings.gamma, 0.0);
        assert_eq!(cfg.initial.kind, InitialKind::II);
        assert_eq!(cfg.time.t_final, 2.0);
        assert_eq!(cfg.outputs.field_dump_interval, 0.0);
    }

    #[test]
    fn overrides_are_validated() {
        let args = ScenarioArgs { dt: Some(-1.0), ..Default::default() };
        assert!(matches!(args.scenario(), Err(CliError::Config(_))));
        let missing = ScenarioArgs { config: Some("/nonexistent/x.toml".into()), ..Default::default() };
        assert_eq!(missing.scenario().unwrap_err().exit_code(), 4);
        let scan = ScanArgs { ratios: Some(vec![1.0, 0.5]), ..Default::default() };
        assert!(scan.scan().is_err());
    }
}
