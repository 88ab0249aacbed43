//! Scenario documents, the analysis and simulation pipeline, reports and
//! the timing benchmark.

pub mod bench;
pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, ConfigError, Mode, ScenarioConfig, Topology, WeightingChoice};
pub use report::{emit_report, parse_record, ReportRecord, RunReport};
pub use run::{analyze_scenario, run_scenario, RunError, RunOptions, RunOutcome, SimulationLog, Stage};
