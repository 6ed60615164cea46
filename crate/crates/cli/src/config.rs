//! Scenario and scan descriptions, read from TOML.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use snpair_core::initial_states::{AssembleConfig, GroundStateOptions, InitialKind, ProfileSpec};
use snpair_core::wigner::RelativeFrame;
use snpair_core::{Couplings, Grid1D};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Masses {
    pub mu1: f64,
    pub mu2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    pub kappa: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Gaussian,
    Stationary,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Gaussian => "gaussian",
            Profile::Stationary => "stationary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Frame {
    EqualMass,
    MassWeighted,
}

impl From<Frame> for RelativeFrame {
    fn from(f: Frame) -> Self {
        match f {
            Frame::EqualMass => RelativeFrame::EqualMass,
            Frame::MassWeighted => RelativeFrame::MassWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Full,
    Hartree,
    Both,
}

mod kind_serde {
    use serde::{Deserialize, Deserializer, Serializer};
    use snpair_core::initial_states::InitialKind;

    pub fn serialize<S: Serializer>(kind: &InitialKind, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(kind)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<InitialKind, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(with = "kind_serde")]
    pub kind: InitialKind,
    pub profile: Profile,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub sigma0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub dir: PathBuf,
    pub csv: String,
    /// Time between field dumps; 0 disables them.
    pub field_dump_interval: f64,
    pub wigner: bool,
    pub negativity: bool,
    /// Write the whole Schmidt spectrum at every sample.
    pub spectrum: bool,
    pub relative_frame: Frame,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            csv: "diagnostics.csv".into(),
            field_dump_interval: 10.0,
            wigner: true,
            negativity: false,
            spectrum: false,
            relative_frame: Frame::MassWeighted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateSection {
    pub dtau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        let d = GroundStateOptions::default();
        Self { dtau: d.dtau, tol: d.tol, max_iter: d.max_iter, check_every: d.check_every }
    }
}

impl From<&GroundStateSection> for GroundStateOptions {
    fn from(g: &GroundStateSection) -> Self {
        GroundStateOptions { dtau: g.dtau, tol: g.tol, max_iter: g.max_iter, check_every: g.check_every }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub solver: Solver,
    pub epsilon: f64,
    pub grid: GridSection,
    pub masses: Masses,
    pub couplings: CouplingSection,
    pub initial: InitialSection,
    pub time: TimeSection,
    pub outputs: Outputs,
    pub ground_state: GroundStateSection,
}

/// Equal unit masses, unit couplings, `R0 = 6`, `sigma0 = 1`, stationary profiles.
impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            solver: Solver::Full,
            epsilon: 0.2,
            grid: GridSection { n: 256, l: 40.0 },
            masses: Masses { mu1: 1.0, mu2: 1.0 },
            couplings: CouplingSection { kappa: 1.0, gamma: 1.0 },
            initial: InitialSection { kind: InitialKind::I, profile: Profile::Stationary, r0: 6.0, sigma0: 1.0 },
            time: TimeSection { dt: 0.01, t_final: 40.0, sample_every: 10 },
            outputs: Outputs::default(),
            ground_state: GroundStateSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {v} must be finite and positive")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {v} must be finite and non-negative")))
    }
}

/// Whole number of `unit`s in `span`, or `None`.
fn whole_multiple(span: f64, unit: f64) -> Option<usize> {
    let m = (span / unit).round();
    ((m * unit - span).abs() <= 1e-9 * span.max(1.0) && m >= 1.0).then_some(m as usize)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        Grid1D::new(self.grid.n, self.grid.l)?;
        positive("epsilon", self.epsilon)?;
        positive("mu1", self.masses.mu1)?;
        positive("mu2", self.masses.mu2)?;
        non_negative("kappa", self.couplings.kappa)?;
        non_negative("gamma", self.couplings.gamma)?;
        non_negative("R0", self.initial.r0)?;
        positive("sigma0", self.initial.sigma0)?;
        if self.initial.r0 >= 0.5 * self.grid.l {
            return Err(CliError::Config(format!(
                "R0 = {} must be below L/2 = {}",
                self.initial.r0,
                0.5 * self.grid.l
            )));
        }
        positive("dt", self.time.dt)?;
        positive("t_final", self.time.t_final)?;
        if self.time.sample_every == 0 {
            return Err(CliError::Config("sample_every must be at least 1".into()));
        }
        if whole_multiple(self.time.t_final, self.time.dt).is_none() {
            return Err(CliError::Config(format!(
                "t_final = {} is not a multiple of dt = {}",
                self.time.t_final, self.time.dt
            )));
        }
        let every = self.outputs.field_dump_interval;
        non_negative("field_dump_interval", every)?;
        if every > 0.0 && whole_multiple(every, self.time.dt).is_none() {
            return Err(CliError::Config(format!("field_dump_interval = {every} is not a multiple of dt")));
        }
        if self.outputs.csv.is_empty() {
            return Err(CliError::Config("outputs.csv must name a file".into()));
        }
        positive("ground_state.dtau", self.ground_state.dtau)?;
        positive("ground_state.tol", self.ground_state.tol)?;
        if self.ground_state.max_iter == 0 || self.ground_state.check_every == 0 {
            return Err(CliError::Config("ground_state.max_iter and check_every must be at least 1".into()));
        }
        if self.solver != Solver::Full && !self.initial.kind.is_product() {
            return Err(CliError::Config(format!(
                "the Hartree solver needs a product initial state, got kind {}",
                self.initial.kind
            )));
        }
        let superposition = matches!(self.initial.kind, InitialKind::III | InitialKind::IV);
        if superposition
            && self.masses.mu1 != self.masses.mu2
            && (self.outputs.wigner || self.outputs.negativity)
            && self.outputs.relative_frame == Frame::EqualMass
        {
            return Err(CliError::Config(
                "unequal-mass superposition states need relative_frame = \"mass_weighted\"".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Ok(Grid1D::new(self.grid.n, self.grid.l)?)
    }

    pub fn masses(&self) -> (f64, f64) {
        (self.masses.mu1, self.masses.mu2)
    }

    pub fn couplings(&self) -> Result<Couplings> {
        Ok(Couplings::new(self.couplings.kappa, self.couplings.gamma)?)
    }

    pub fn ground_state_options(&self) -> GroundStateOptions {
        (&self.ground_state).into()
    }

    pub fn assemble_config(&self) -> Result<AssembleConfig> {
        let profile = match self.initial.profile {
            Profile::Gaussian => ProfileSpec::Gaussian,
            Profile::Stationary => ProfileSpec::Stationary(self.ground_state_options()),
        };
        Ok(AssembleConfig {
            kind: self.initial.kind,
            profile,
            r0: self.initial.r0,
            sigma0: self.initial.sigma0,
            masses: self.masses(),
            couplings: self.couplings()?,
        })
    }

    pub fn n_steps(&self) -> usize {
        whole_multiple(self.time.t_final, self.time.dt).unwrap_or(0)
    }

    /// Steps between field dumps, if enabled.
    pub fn dump_stride(&self) -> Option<usize> {
        let every = self.outputs.field_dump_interval;
        if every > 0.0 {
            whole_multiple(every, self.time.dt)
        } else {
            None
        }
    }

    pub fn csv_path(&self) -> PathBuf {
        self.outputs.dir.join(&self.outputs.csv)
    }

    pub fn relative_frame(&self) -> RelativeFrame {
        self.outputs.relative_frame.into()
    }
}

pub fn default_ratios() -> Vec<f64> {
    vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
}

fn default_profiles() -> Vec<Profile> {
    vec![Profile::Gaussian, Profile::Stationary]
}

fn default_window() -> f64 {
    40.0
}

/// Mass-ratio sweep `mu1 / mu2` with `mu2` held at the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_profiles")]
    pub profiles: Vec<Profile>,
    #[serde(default = "default_window")]
    pub peak_window: f64,
    #[serde(default)]
    pub base: ScenarioConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { ratios: default_ratios(), profiles: default_profiles(), peak_window: default_window(), base: Default::default() }
    }
}

impl ScanConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scan config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratios.is_empty() {
            return Err(CliError::Config("scan needs at least one mass ratio".into()));
        }
        if let Some(r) = self.ratios.iter().find(|r| !(r.is_finite() && **r >= 1.0)) {
            return Err(CliError::Config(format!("mass ratio {r} must be >= 1")));
        }
        if self.profiles.is_empty() {
            return Err(CliError::Config("scan needs at least one profile".into()));
        }
        positive("peak_window", self.peak_window)?;
        for &profile in &self.profiles {
            self.point(1.0, profile).validate()?;
        }
        Ok(())
    }

    /// The scenario run at one scan point.
    pub fn point(&self, ratio: f64, profile: Profile) -> ScenarioConfig {
        let mut cfg = self.base.clone();
        cfg.masses.mu1 = ratio * self.base.masses.mu2;
        cfg.initial.profile = profile;
        cfg.outputs.dir = self.base.outputs.dir.join(point_dir(ratio, profile));
        cfg
    }
}

pub fn point_dir(ratio: f64, profile: Profile) -> String {
    format!("{}_ratio_{ratio:.2}", profile.name())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn baseline_survives_a_round_trip() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        let scan = ScanConfig::default();
        assert_eq!(ScanConfig::from_toml(&scan.to_toml()).unwrap(), scan);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = ScenarioConfig::from_toml("[initial]\nkind = \"IV\"\nprofile = \"gaussian\"\nR0 = 6.0\nsigma0 = 1.0\n").unwrap();
        assert_eq!(cfg.initial.kind, InitialKind::IV);
        assert_eq!(cfg.grid.n, 256);
        assert_eq!(cfg.n_steps(), 4000);
        assert_eq!(cfg.dump_stride(), Some(1000));
    }

    #[test]
    fn rejects_bad_input() {
        let bad = [
            "epsilon = -0.2",
            "[grid]\nN = 256\nL = 10.0\n",
            "[time]\ndt = 0.01\nt_final = 1.005\nsample_every = 1\n",
            "[time]\ndt = 0.01\nt_final = 1.0\nsample_every = 0\n",
            "[outputs]\nfield_dump_interval = 0.015\n",
            "solver = \"hartree\"\n[initial]\nkind = \"III\"\nprofile = \"gaussian\"\nR0 = 6.0\nsigma0 = 1.0\n",
            "[initial]\nkind = \"V\"\nprofile = \"gaussian\"\nR0 = 6.0\nsigma0 = 1.0\n",
            "typo = 1",
            "[masses]\nmu1 = 2.0\nmu2 = 1.0\n[initial]\nkind = \"IV\"\nprofile = \"gaussian\"\nR0 = 6.0\nsigma0 = 1.0\n[outputs]\nrelative_frame = \"equal_mass\"\n",
        ];
        for text in bad {
            assert!(matches!(ScenarioConfig::from_toml(text), Err(CliError::Config(_))), "{text}");
        }
        assert!(ScanConfig::from_toml("ratios = [0.5]").is_err());
        assert!(ScanConfig::from_toml("ratios = []").is_err());
    }

    #[test]
    fn scan_points_fix_the_lighter_mass() {
        let scan = ScanConfig::default();
        let p = scan.point(2.5, Profile::Gaussian);
        assert_eq!(p.masses(), (2.5, 1.0));
        assert_eq!(p.initial.profile, Profile::Gaussian);
        assert!(p.outputs.dir.ends_with("gaussian_ratio_2.50"));
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            (prop::sample::select(vec![64usize, 128, 256]), 20.0..80.0f64, 0.05..1.0f64),
            (0.5..5.0f64, 0.5..5.0f64, 0.0..3.0f64, 0.0..3.0f64),
            (0usize..4, any::<bool>(), 0.0..1.0f64, 0.5..2.0f64),
            (1usize..200, 1usize..20, any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()),
        )
            .prop_map(|((n, l, eps), (mu1, mu2, kappa, gamma), (kind, gauss, r0, sigma0), (steps, every, dump, w, neg, frame))| {
                let mut c = ScenarioConfig { grid: GridSection { n, l }, epsilon: eps, ..ScenarioConfig::default() };
                c.masses = Masses { mu1, mu2 };
                c.couplings = CouplingSection { kappa, gamma };
                c.initial = InitialSection {
                    kind: InitialKind::ALL[kind],
                    profile: if gauss { Profile::Gaussian } else { Profile::Stationary },
                    r0: r0 * 0.45 * l,
                    sigma0,
                };
                c.time = TimeSection { dt: 0.01, t_final: steps as f64 * 0.01, sample_every: every };
                c.outputs.field_dump_interval = if dump { every as f64 * 0.01 } else { 0.0 };
                c.outputs.wigner = w;
                c.outputs.negativity = neg;
                c.outputs.relative_frame = if frame { Frame::MassWeighted } else { Frame::EqualMass };
                c
            })
    }

    proptest! {
        #[test]
        fn serialised_configs_parse_back_identically(cfg in arb_config()) {
            let text = cfg.to_toml();
            let parsed: ScenarioConfig = toml::from_str(&text).unwrap();
            prop_assert_eq!(parsed, cfg);
        }
    }
}
