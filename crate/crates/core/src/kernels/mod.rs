//! Benchmark task bodies with controllable load imbalance.
//!
//! Every task body is a pure function of its parameters and a task index, so
//! any schedule produces the same results.

use std::io;
use std::path::PathBuf;

pub mod mandelbrot;
pub mod spin_image;
pub mod synthetic;

pub use mandelbrot::{mandelbrot_pixel, render_mandelbrot, write_pgm, MandelbrotParams};
pub use spin_image::{
    gaussian_mixture_cloud, load_oriented_points, spin_image, write_spin_image_csv, OrientedPoint,
    SpinImageParams,
};
pub use synthetic::{
    busy_wait, iterations_per_second, synthetic_task, timestep_workload, CostDistribution,
    SyntheticSpec, TimestepSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum KernelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
}
