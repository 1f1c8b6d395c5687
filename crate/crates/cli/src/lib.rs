//! Scenario runner for the l1lab experiments.
//!
//! A scenario is a JSON document naming one experiment, its parameters, a
//! seed and an output directory. [`validate_config`] checks it against the
//! per-experiment schema and [`run_scenario`] executes it, writing
//! `report.json`, `results.json` and CSV traces.

pub mod config;
pub mod run;
pub mod sources;

pub use config::{validate_config, validate_value, Experiment, ScenarioConfig, Violation};
pub use run::{digest_config, run_scenario, RunError, RunReport};

/// Process exit code for a scenario that fails validation.
pub const EXIT_INVALID: u8 = 2;
/// Process exit code for an experiment that fails while running.
pub const EXIT_FAILED: u8 = 3;
