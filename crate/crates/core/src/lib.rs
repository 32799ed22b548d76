//! Dynamic loop self-scheduling: chunk rules, benchmark kernels and
//! load-imbalance metrics.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the runtime and the benchmark harness
//! use.

pub mod kernels;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod technique;
pub mod trace;

pub use metrics::{cov, mean_max, percent_improvement, ImbalanceReport, MetricError};
pub use scalar::Real;
pub use schedule::{
    carry_weights, ChunkAssignment, FscParams, PerformanceRecord, ScheduleError, Scheduler,
    SchedulerOptions,
};
pub use technique::{ProcTechnique, TechniqueKind, UnknownTechnique};

pub type Scheduler64 = Scheduler<f64>;
pub type Scheduler32 = Scheduler<f32>;
