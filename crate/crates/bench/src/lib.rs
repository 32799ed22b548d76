//! Factorial experiments over pairs of process- and thread-level loop
//! scheduling techniques.
//!
//! [`config`] reads and checks an experiment, [`sweep`] runs every technique
//! pair with repetitions and keeps resumable per-cell results, and
//! [`report`] turns a sweep into raw CSV, improvement matrices and per-level
//! comparisons.

pub mod config;
pub mod report;
pub mod stats;
pub mod sweep;
pub mod workload;

pub use config::{parse_config, validate_config, validate_config_with, ConfigError, ExperimentConfig, Flags};
pub use report::{write_report, ReportError, ReportFormat};
pub use sweep::{load_sweep, run_sweep, CellResult, SweepError, SweepResult};
pub use workload::{render_scheduled, Workload};
