//! Scenario runner for coincidence-detection experiments: parses scenario
//! files, dispatches the computations in `coincidence-core` and writes
//! deterministic CSV/JSON tables with a manifest.

pub mod runner;
pub mod scenario;
pub mod table;

pub use runner::{execute, run, ExitStatus, RunOptions};
pub use scenario::{parse_scenario, Scenario, ScenarioError};
