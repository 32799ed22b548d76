//! Escape-time rendering of `f_c(z) = z^4 + c`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::scalar::Real;

/// Escape radius.
const ESCAPE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MandelbrotParams<F> {
    pub width: u32,
    pub height: u32,
    pub max_iter: u32,
    pub re_min: F,
    pub re_max: F,
    pub im_min: F,
    pub im_max: F,
    pub scale_color: u32,
}

impl<F: Real> MandelbrotParams<F> {
    /// Square-pixel viewport of real extent `span` around `center`.
    pub fn centered(
        width: u32,
        height: u32,
        max_iter: u32,
        center: (F, F),
        span: F,
    ) -> Result<Self, KernelError> {
        let half = span / F::lit(2.0);
        let half_im = half * F::count(height as u64) / F::count(width.max(1) as u64);
        let p = MandelbrotParams {
            width,
            height,
            max_iter,
            re_min: center.0 - half,
            re_max: center.0 + half,
            im_min: center.1 - half_im,
            im_max: center.1 + half_im,
            scale_color: 1,
        };
        p.validate()?;
        Ok(p)
    }

    /// The default benchmark region: a valley between two lobes of the
    /// quartic set, where escape counts vary over four orders of magnitude.
    pub fn seahorse(width: u32, height: u32, max_iter: u32) -> Result<Self, KernelError> {
        Self::centered(width, height, max_iter, (F::lit(-1.05), F::lit(0.2)), F::lit(0.05))
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.width == 0 || self.height == 0 || self.max_iter == 0 {
            return Err(KernelError::InvalidArgument(
                "width, height and max_iter must be at least 1".into(),
            ));
        }
        if !(self.re_max > self.re_min) || !(self.im_max > self.im_min) {
            return Err(KernelError::InvalidArgument("empty viewport".into()));
        }
        Ok(())
    }

    pub fn scale_real(&self) -> F {
        (self.re_max - self.re_min) / F::count(self.width as u64)
    }

    pub fn scale_imag(&self) -> F {
        (self.im_max - self.im_min) / F::count(self.height as u64)
    }

    pub fn tasks(&self) -> u64 {
        self.width as u64 * self.height as u64
    }
}

/// Color of pixel `i` (row-major, row 0 at the top): `(k - 1) * scale_color`
/// where `k` is the escape iteration, capped at `max_iter`.
pub fn mandelbrot_pixel<F: Real>(i: u64, p: &MandelbrotParams<F>) -> u32 {
    let w = p.width as u64;
    let row = i / w;
    let col = i % w;
    let c_re = p.re_min + F::count(col) * p.scale_real();
    let c_im = p.im_min + F::count(p.height as u64 - 1 - row) * p.scale_imag();

    let limit = F::lit(ESCAPE * ESCAPE);
    let (mut zr, mut zi) = (F::zero(), F::zero());
    let mut lengthsq = F::zero();
    let mut k = 0u32;
    while lengthsq < limit && k < p.max_iter {
        let zr2 = zr * zr;
        let zi2 = zi * zi;
        let temp = zr2 * zr2 - F::lit(6.0) * zi2 * zr2 + zi2 * zi2 + c_re;
        zi = F::lit(4.0) * zr2 * zr * zi - F::lit(4.0) * zr * zi2 * zi + c_im;
        zr = temp;
        lengthsq = zr * zr + zi * zi;
        k += 1;
    }
    (k - 1).saturating_mul(p.scale_color)
}

/// Whole image, computed sequentially.
pub fn render_mandelbrot<F: Real>(p: &MandelbrotParams<F>) -> Vec<u32> {
    (0..p.tasks()).map(|i| mandelbrot_pixel(i, p)).collect()
}

/// Binary greyscale PGM (P5). Values are clamped to 65535; samples are
/// 16-bit big-endian when the maximum exceeds 255.
pub fn write_pgm<W: Write>(mut out: W, width: u32, height: u32, data: &[u32]) -> io::Result<()> {
    if data.len() as u64 != width as u64 * height as u64 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("{} pixels for a {width}x{height} image", data.len()),
        ));
    }
    let maxval = data.iter().copied().max().unwrap_or(0).clamp(1, 65535);
    write!(out, "P5\n{width} {height}\n{maxval}\n")?;
    if maxval > 255 {
        let bytes: Vec<u8> = data
            .iter()
            .flat_map(|&v| (v.min(65535) as u16).to_be_bytes())
            .collect();
        out.write_all(&bytes)?;
    } else {
        let bytes: Vec<u8> = data.iter().map(|&v| v as u8).collect();
        out.write_all(&bytes)?;
    }
    out.flush()
}
