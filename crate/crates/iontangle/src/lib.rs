//! Scenario runner, parameter sweeps and dataset output for `iontangle-core`.
//!
//! A run takes a [`ScenarioConfig`] (JSON, frequencies as `value/2π` in kHz)
//! and produces a [`ScenarioResult`]: a metadata record and CSV tables, written
//! to `<out>/<name>/`.

pub mod config;
mod error;
pub mod scenarios;
pub mod sweep;
pub mod table;

use std::path::{Path, PathBuf};

pub use config::{Axis, Overrides, RunOptions, ScenarioConfig};
pub use error::RunError;
pub use scenarios::{run_evolve, run_scenario, run_steady, run_sweep, Engineered, ScenarioResult, SCENARIOS};
pub use table::{Cell, Table};

/// Output root: the command-line directory, else the file's `output_dir`,
/// else `out`.
pub fn output_root(cli: Option<&Path>, cfg: &ScenarioConfig) -> PathBuf {
    cli.map(Path::to_path_buf).or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}
