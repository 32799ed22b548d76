//! Spin-image descriptors of oriented 3D points.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::KernelError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint<F> {
    pub position: [F; 3],
    pub normal: [F; 3],
}

fn dot<F: Real>(a: &[F; 3], b: &[F; 3]) -> F {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub<F: Real>(a: &[F; 3], b: &[F; 3]) -> [F; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpinImageParams<F> {
    width: usize,
    bin_size: F,
    support_angle: F,
    points: Vec<OrientedPoint<F>>,
}

impl<F: Real> SpinImageParams<F> {
    /// Normals must be unit length within `1e-9` (`1e-5` for `f32`).
    pub fn new(
        width: usize,
        bin_size: F,
        support_angle: F,
        points: Vec<OrientedPoint<F>>,
    ) -> Result<Self, KernelError> {
        let bad = |m: String| Err(KernelError::InvalidArgument(m));
        if width == 0 {
            return bad("spin-image width must be at least 1".into());
        }
        if !(bin_size > F::zero()) || !bin_size.is_finite() {
            return bad(format!("bin size must be positive, got {bin_size}"));
        }
        if !(support_angle >= F::zero() && support_angle <= F::lit(std::f64::consts::PI)) {
            return bad(format!("support angle must lie in [0, pi], got {support_angle}"));
        }
        let tol = F::lit(1e-9).max(F::epsilon() * F::lit(64.0));
        for (j, pt) in points.iter().enumerate() {
            let len = dot(&pt.normal, &pt.normal).sqrt();
            if !((len - F::one()).abs() <= tol) {
                return bad(format!("normal of point {j} has length {len}"));
            }
        }
        Ok(SpinImageParams {
            width,
            bin_size,
            support_angle,
            points,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bin_size(&self) -> F {
        self.bin_size
    }

    pub fn support_angle(&self) -> F {
        self.support_angle
    }

    pub fn points(&self) -> &[OrientedPoint<F>] {
        &self.points
    }

    /// Number of images, one per oriented point.
    pub fn tasks(&self) -> u64 {
        self.points.len() as u64
    }
}

/// `width x width` histogram (row-major, index `k * width + l`) for point
/// `image_index`. Pairs whose bins fall outside the image are skipped.
pub fn spin_image<F: Real>(image_index: u64, p: &SpinImageParams<F>) -> Vec<u32> {
    let w = p.width;
    let wf = F::count(w as u64);
    let half = wf / F::lit(2.0);
    let mut hist = vec![0u32; w * w];
    let pi = &p.points[image_index as usize];
    for x in &p.points {
        let cos = dot(&pi.normal, &x.normal).max(-F::one()).min(F::one());
        if !(cos.acos() <= p.support_angle) {
            continue;
        }
        let d = sub(&x.position, &pi.position);
        let along = dot(&pi.normal, &d);
        let k = ((half - along) / p.bin_size).ceil();
        let radial = (dot(&d, &d) - along * along).max(F::zero()).sqrt();
        let l = (radial / p.bin_size).ceil();
        if k >= F::zero() && k < wf && l >= F::zero() && l < wf {
            let (k, l) = (k.to_usize().unwrap_or(w), l.to_usize().unwrap_or(w));
            debug_assert!(k < w && l < w);
            hist[k * w + l] += 1;
        }
    }
    hist
}

/// Points drawn around `clusters` centres, placed uniformly in a cube of
/// side `extent`, with unequal populations (geometric weights) so neighbour
/// density, and with it the per-image cost, varies across the cloud. Normals
/// point away from the owning centre.
///
/// The bin formula compares `W / 2` with raw distances, so `extent` should be
/// on the order of `W * B` for the histograms to be populated.
pub fn gaussian_mixture_cloud<F: Real>(
    m: usize,
    clusters: usize,
    extent: f64,
    spread: f64,
    seed: u64,
) -> Result<Vec<OrientedPoint<F>>, KernelError> {
    if clusters == 0 {
        return Err(KernelError::InvalidArgument("cluster count must be at least 1".into()));
    }
    if !(extent >= 0.0 && extent.is_finite()) {
        return Err(KernelError::InvalidArgument(format!("cloud extent {extent} must be finite and >= 0")));
    }
    let normal = Normal::new(0.0, spread)
        .map_err(|e| KernelError::InvalidArgument(format!("cluster spread {spread}: {e}")))?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let centres: Vec<[f64; 3]> = (0..clusters)
        .map(|_| [(); 3].map(|_| extent * rng.random::<f64>()))
        .collect();
    let weights: Vec<f64> = (0..clusters).map(|c| 0.5f64.powi(c as i32)).collect();
    let total: f64 = weights.iter().sum();

    let mut points = Vec::with_capacity(m);
    while points.len() < m {
        let mut u = rng.random::<f64>() * total;
        let mut c = 0;
        while c + 1 < clusters && u >= weights[c] {
            u -= weights[c];
            c += 1;
        }
        let off = [
            normal.sample(&mut rng),
            normal.sample(&mut rng),
            normal.sample(&mut rng),
        ];
        let len = (off[0] * off[0] + off[1] * off[1] + off[2] * off[2]).sqrt();
        if !(len > 1e-12) {
            continue;
        }
        let pos = [centres[c][0] + off[0], centres[c][1] + off[1], centres[c][2] + off[2]];
        points.push(OrientedPoint {
            position: pos.map(F::lit),
            normal: off.map(|v| F::lit(v / len)),
        });
    }
    Ok(points)
}

/// Whitespace-separated `x y z nx ny nz` per line; `#` starts a comment.
/// Normals are taken as given and checked by [`SpinImageParams::new`].
pub fn load_oriented_points<F: Real>(path: &Path) -> Result<Vec<OrientedPoint<F>>, KernelError> {
    let text = fs::read_to_string(path).map_err(|source| KernelError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |msg: String| KernelError::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_err(format!("`{t}`: {e}"))))
            .collect::<Result<_, _>>()?;
        if vals.len() != 6 {
            return Err(parse_err(format!("expected 6 columns, found {}", vals.len())));
        }
        points.push(OrientedPoint {
            position: [vals[0], vals[1], vals[2]].map(F::lit),
            normal: [vals[3], vals[4], vals[5]].map(F::lit),
        });
    }
    Ok(points)
}

/// One histogram row per line, comma-separated.
pub fn write_spin_image_csv<W: Write>(mut out: W, width: usize, hist: &[u32]) -> io::Result<()> {
    for row in hist.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()
}
