//! Experiment runner and I/O surface: configuration, persistence, the three
//! subcommands, and the report.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::{cmd_analyze, cmd_pretrain, cmd_run, AnalyzeOptions};
pub use config::ExperimentConfig;
pub use report::ExperimentReport;
