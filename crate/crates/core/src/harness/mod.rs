//! Scenario runner, configuration, persistence and refinement studies.

pub mod checkpoint;
pub mod config;
pub mod init;
pub mod refine;
pub mod scenario;

pub use checkpoint::{checkpoint_read, checkpoint_write};
pub use config::{ScenarioConfig, ScenarioKind};
pub use refine::{RefinementTable, refinement_study};
pub use scenario::{RunOptions, RunOutput, RunSummary, Verdict, VerdictStatus, run_scenario, run_scenario_full};
