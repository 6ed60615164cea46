//! Configuration, experiment drivers, artifacts and plots for two-body
//! Schrödinger–Newton runs.

pub mod args;
pub mod config;
pub mod converge;
pub mod error;
pub mod io;
pub mod plot;
pub mod run;
pub mod scan;

pub use config::{ScanConfig, ScenarioConfig};
pub use error::{CliError, Result};
