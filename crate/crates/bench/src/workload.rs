//! Kernels as loop bodies.

use std::hint::black_box;
use std::sync::atomic::{AtomicU32, Ordering};

use dls_core::kernels::{
    busy_wait, gaussian_mixture_cloud, load_oriented_points, mandelbrot_pixel, spin_image, KernelError,
    MandelbrotParams, SpinImageParams, SyntheticSpec, TimestepSpec,
};
use dls_runtime::{setup, RunPlan, RunResult, RuntimeError, TaskContext};

use crate::config::KernelConfig;

#[derive(Debug, Clone)]
pub enum Workload {
    Mandelbrot(MandelbrotParams<f64>),
    SpinImage(SpinImageParams<f64>),
    Synthetic { spec: SyntheticSpec, rank_cost: Vec<f64> },
    Timestep { spec: TimestepSpec, rank_cost: Vec<f64> },
}

impl Workload {
    /// Instantiate `kernel` for `n` tasks on `p` ranks.
    pub fn build(kernel: &KernelConfig, n: u64, p: usize, seed: u64) -> Result<Self, KernelError> {
        let rank_cost = |m: &[f64]| if m.is_empty() { vec![1.0; p] } else { m.to_vec() };
        Ok(match kernel {
            KernelConfig::Mandelbrot(m) => Workload::Mandelbrot(MandelbrotParams::centered(
                m.width,
                m.height,
                m.max_iter,
                (m.center[0], m.center[1]),
                m.span,
            )?),
            KernelConfig::Spinimage(s) => {
                let points = match &s.file {
                    Some(path) => load_oriented_points(path)?,
                    None => gaussian_mixture_cloud(n as usize, s.clusters, s.extent, s.spread, seed)?,
                };
                Workload::SpinImage(SpinImageParams::new(s.image_width, s.bin_size, s.support_angle, points)?)
            }
            KernelConfig::Synthetic(s) => Workload::Synthetic {
                spec: SyntheticSpec::new(n, s.distribution, s.base_cost_us, seed)?,
                rank_cost: rank_cost(&s.rank_cost_multipliers),
            },
            KernelConfig::Timestep(s) => {
                let spec = TimestepSpec {
                    base: SyntheticSpec::new(n, s.distribution, s.base_cost_us, seed)?,
                    drift: s.drift,
                    intensity_amplitude: s.intensity_amplitude,
                    intensity_period: s.intensity_period,
                };
                spec.validate()?;
                Workload::Timestep {
                    spec,
                    rank_cost: rank_cost(&s.rank_cost_multipliers),
                }
            }
        })
    }

    pub fn tasks(&self) -> u64 {
        match self {
            Workload::Mandelbrot(m) => m.tasks(),
            Workload::SpinImage(s) => s.tasks(),
            Workload::Synthetic { spec, .. } => spec.n,
            Workload::Timestep { spec, .. } => spec.base.n,
        }
    }

    /// Run task `i`; results are discarded.
    pub fn execute(&self, i: u64, ctx: &TaskContext) {
        match self {
            Workload::Mandelbrot(m) => {
                black_box(mandelbrot_pixel(i, m));
            }
            Workload::SpinImage(s) => {
                black_box(spin_image(i, s));
            }
            Workload::Synthetic { spec, rank_cost } => {
                busy_wait(spec.cost(i) * rank_cost[ctx.rank]);
            }
            Workload::Timestep { spec, rank_cost } => {
                busy_wait(spec.cost(ctx.timestep, i) * rank_cost[ctx.rank]);
            }
        }
    }
}

/// Render the whole image with the schedule of `plan`, one pixel per task.
pub fn render_scheduled(
    params: &MandelbrotParams<f64>,
    mut plan: RunPlan,
) -> Result<(Vec<u32>, RunResult), RuntimeError> {
    let n = params.tasks();
    plan.n = n;
    let pixels: Vec<AtomicU32> = (0..n).map(|_| AtomicU32::new(0)).collect();
    let mut rt = setup(plan)?;
    let result = rt.run_loop(&|i, _| pixels[i as usize].store(mandelbrot_pixel(i, params), Ordering::Relaxed))?;
    Ok((pixels.into_iter().map(AtomicU32::into_inner).collect(), result))
}
