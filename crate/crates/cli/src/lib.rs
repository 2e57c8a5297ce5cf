//! Run configuration, scenario registry and report emission for the `homlab` binary.

pub mod config;
pub mod registry;
pub mod runner;

pub use config::{builtin_configs, find_config, Monitor, RunConfig, SCHEMA};
pub use registry::Registry;
pub use runner::{exit_code_for, run, RunSummary, Status};
