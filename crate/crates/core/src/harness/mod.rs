//! Configuration-driven simulation studies.

pub mod baseline;
pub mod config;
pub mod output;
pub mod run;

pub use baseline::ols_baseline;
pub use config::{ExperimentConfig, ModelKind, Overrides, ResolvedConfig, Scenario};
pub use output::{coverage_csv, estimates_csv, parse_summary, summary_json, write_outputs};
pub use run::{run_experiment, CoverageReport, ExperimentOutcome, GroupReport, ReplicateResult};
