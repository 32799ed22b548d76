//! Closed-form chunk-size rules. Everything here is a pure function of the
//! loop shape and, for FSC and AF, of externally supplied statistics.

use crate::scalar::{ceil_count, Real};

/// `ceil(a / b)` for `b > 0`.
pub fn div_ceil(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Block size of STATIC: `ceil(N/P)`.
pub fn static_chunk(n: u64, p: u64) -> u64 {
    div_ceil(n, p)
}

/// GSS: `ceil(R/P)`.
pub fn gss_chunk(remaining: u64, p: u64) -> u64 {
    div_ceil(remaining, p)
}

/// Fixed FSC chunk `ceil((sqrt(2)*N*h / (sigma*P*sqrt(ln P)))^(2/3))`.
///
/// For `P = 1` the logarithm vanishes and the chunk is `ceil(N/2)`. The
/// result is clamped to `[1, N]`.
pub fn fsc_chunk<F: Real>(n: u64, p: u64, overhead: F, sigma: F) -> u64 {
    if p <= 1 {
        return div_ceil(n, 2).max(1);
    }
    let nf = F::count(n);
    let pf = F::count(p);
    let base = F::lit(2.0).sqrt() * nf * overhead / (sigma * pf * pf.ln().sqrt());
    let s = ceil_count(base.powf(F::lit(2.0 / 3.0)));
    s.clamp(1, n.max(1))
}

/// mFSC chunk: `ceil(N / (P * max(1, log2(N/P))))`, giving about as many
/// chunks as practical factoring.
pub fn mfsc_chunk(n: u64, p: u64) -> u64 {
    let ratio = n as f64 / p as f64;
    let rounds = ratio.log2().max(1.0);
    let s = (n as f64 / (p as f64 * rounds)).ceil() as u64;
    s.clamp(1, n.max(1))
}

/// Default process-level minimum chunk: half the mFSC chunk, at least 1.
pub fn half_mfsc_chunk(n: u64, p: u64) -> u64 {
    (mfsc_chunk(n, p) / 2).max(1)
}

/// Trapezoid parameters: first chunk, last chunk and linear decrement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TssParams {
    pub first: u64,
    pub last: u64,
    pub decrement: u64,
}

impl TssParams {
    /// `first = ceil(N/(2P))`, `last = 1`, `C = ceil(2N/(first+last))`,
    /// `decrement = floor((first-last)/(C-1))`.
    pub fn new(n: u64, p: u64) -> Self {
        let first = div_ceil(n, 2 * p).max(1);
        let last = 1;
        let steps = div_ceil(2 * n, first + last);
        let decrement = if steps > 1 {
            (first - last) / (steps - 1)
        } else {
            0
        };
        TssParams {
            first,
            last,
            decrement,
        }
    }

    /// Chunk size of the `k`-th request (0-based), before truncation to R.
    pub fn chunk(&self, k: u64) -> u64 {
        self.first
            .saturating_sub(k.saturating_mul(self.decrement))
            .max(self.last)
    }
}

/// Size of a new factoring batch: half the remaining iterations.
pub fn fac_batch(remaining: u64) -> u64 {
    div_ceil(remaining, 2)
}

/// RAND bounds `[max(1, floor(N/(100P))), max(lo, floor(N/(2P)))]`.
pub fn rand_bounds(n: u64, p: u64) -> (u64, u64) {
    let lo = (n / (100 * p)).max(1);
    let hi = (n / (2 * p)).max(lo);
    (lo, hi)
}

/// Adaptive factoring chunk for a PE with mean per-iteration time `mu`:
/// `(D + 2T - sqrt(D^2 + 4DT)) / (2*mu)`, where `D = sum(sigma_q^2/mu_q)`
/// and `T = R / sum(1/mu_q)`.
pub fn af_chunk<F: Real>(mu: F, d: F, t: F) -> F {
    let two = F::lit(2.0);
    (d + two * t - (d * d + F::lit(4.0) * d * t).sqrt()) / (two * mu)
}
