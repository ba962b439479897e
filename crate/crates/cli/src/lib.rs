//! Command-line front end for airdroplab: reads a scenario file, runs one
//! command and writes `results.csv` plus `summary.json`.

pub mod output;
pub mod run;
pub mod scenario;

pub use run::{run, RunError, RunReport, RunStatus};
pub use scenario::{parse_scenario, CommandKind, ScenarioError, ScenarioFile};
