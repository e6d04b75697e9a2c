//! Configuration parsing and the batch runner behind the `decolab` binary.
//!
//! A run is described by one TOML file; see the README for the grammar.
//! Outputs are `series.csv`, `summary.json` and, for `verify`, `verify.csv`.

mod config;
mod run;

use std::path::{Path, PathBuf};

pub use config::{
    parse_config, parse_config_in, ConfigError, EnvBlocks, Environment, ObservableSelection, RunConfig, Scenario,
    ScenarioName, SidRun, SpinBathRun, TwoTimesRun, VerifyRun,
};
pub use run::{
    execute, run, Artifacts, FitSummary, Methods, SeriesRow, Summary, TimeValue, TrendSummary, TwoStageSummary,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_VERIFICATION: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn validation(e: impl std::fmt::Display) -> Self {
        CliError::Validation(e.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

/// Reads and parses a configuration file; relative paths inside it resolve
/// against the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_config_in(&text, base)?)
}
