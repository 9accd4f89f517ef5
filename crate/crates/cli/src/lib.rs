//! Batch driver for the `divspec` workbench: strict TOML run configurations,
//! one pipeline per command, CSV tables with optional SVG plots, run records
//! and a summary report over records.

pub mod cache;
pub mod config;
pub mod record;
pub mod run;
pub mod svg;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use record::{report, Check, ResultRecord};
pub use run::{run, Outcome, RunError, RunOptions};
