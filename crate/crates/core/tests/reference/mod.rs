//! Brute-force reference for every chunk rule, written directly from the
//! technique descriptions and kept free of any `dls_core::schedule` code.
//!
//! The driver requests round-robin (PE `k mod P` on request `k`), and reports
//! each chunk right after it is issued with deterministic synthetic times from
//! [`observed_times`], so adaptive techniques are exercised too.

#![allow(dead_code)]

use dls_core::rng::ChunkRng;
use dls_core::TechniqueKind;

pub const FSC_H: f64 = 1e-4;
pub const FSC_SIGMA: f64 = 1e-3;

/// `(exec_time, sched_time)` reported for a chunk of `size` on `pe` at `round`.
pub fn observed_times(pe: usize, round: u64, size: u64) -> (f64, f64) {
    let tau = 1e-3 * (1.0 + (pe % 3) as f64);
    let jitter = 1.0 + 0.05 * ((round % 5) as f64 - 2.0);
    (tau * jitter * size as f64, 2e-5 * (1 + pe % 2) as f64)
}

fn ceil_div(a: u64, b: u64) -> u64 {
    (a + b - 1) / b
}

fn weights_from(times: &[Option<f64>]) -> Option<Vec<f64>> {
    let mut rates = Vec::new();
    let mut known_sum = 0.0;
    let mut known = 0u64;
    for t in times {
        match t {
            Some(t) => {
                let r = 1.0 / t.max(1e-12);
                known_sum += r;
                known += 1;
                rates.push(Some(r));
            }
            None => rates.push(None),
        }
    }
    if known == 0 {
        return None;
    }
    let fill = known_sum / known as f64;
    let rates: Vec<f64> = rates.into_iter().map(|r| r.unwrap_or(fill)).collect();
    let total: f64 = rates.iter().sum();
    let p = rates.len() as f64;
    Some(rates.iter().map(|r| p * r / total).collect())
}

#[derive(Default, Clone)]
struct Pe {
    // (size, exec, sched)
    samples: Vec<(u64, f64, f64)>,
}

impl Pe {
    fn chunk_weighted(&self, with_sched: bool) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let mut num = 0.0;
        for (j, (size, exec, sched)) in self.samples.iter().enumerate() {
            let busy = if with_sched { exec + sched } else { *exec };
            num += (j + 1) as f64 * (busy / *size as f64);
        }
        let k = self.samples.len() as u64;
        Some(num / (k * (k + 1) / 2) as f64)
    }

    fn moments(&self) -> Option<(f64, f64)> {
        if self.samples.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = self.samples.iter().map(|(s, e, _)| e / *s as f64).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        Some((mean, var.sqrt()))
    }
}

/// Chunk sequence `(pe, start, size)` of one loop.
pub fn sequence(t: TechniqueKind, n: u64, p: usize, min_chunk: u64, seed: u64) -> Vec<(usize, u64, u64)> {
    let pu = p as u64;
    let mut out = Vec::new();

    if t == TechniqueKind::Static {
        let c = ceil_div(n, pu);
        for pe in 0..p {
            let start = pe as u64 * c;
            if start < n {
                out.push((pe, start, c.min(n - start)));
            }
        }
        return out;
    }

    let min_chunk = min_chunk.max(1);
    let mut rng = ChunkRng::new(seed);
    let mut r = n;
    let mut pes = vec![Pe::default(); p];
    let mut w = vec![1.0f64; p];
    let mut batch_left = 0u64;
    let mut batch_c = 0u64;
    let mut k = 0u64;

    let tss_first = ceil_div(n, 2 * pu).max(1);
    let tss_steps = ceil_div(2 * n, tss_first + 1);
    let tss_dec = if tss_steps > 1 { (tss_first - 1) / (tss_steps - 1) } else { 0 };

    while r > 0 {
        let pe = (k % pu) as usize;
        let batched = matches!(
            t,
            TechniqueKind::Fac
                | TechniqueKind::Wf
                | TechniqueKind::Awf
                | TechniqueKind::AwfB
                | TechniqueKind::AwfC
                | TechniqueKind::AwfD
                | TechniqueKind::AwfE
                | TechniqueKind::Af
        );
        if batched && batch_left == 0 {
            let b = ceil_div(r, 2);
            batch_c = ceil_div(b, pu);
            batch_left = (batch_c * pu).min(r);
        }

        let rule = match t {
            TechniqueKind::Ss => 1,
            TechniqueKind::Fsc => {
                if p == 1 {
                    ceil_div(n, 2)
                } else {
                    let x = (2f64.sqrt() * n as f64 * FSC_H)
                        / (FSC_SIGMA * p as f64 * (p as f64).ln().sqrt());
                    (x.powf(2.0 / 3.0).ceil() as u64).clamp(1, n)
                }
            }
            TechniqueKind::Mfsc => {
                let l = (n as f64 / p as f64).log2().max(1.0);
                ((n as f64 / (p as f64 * l)).ceil() as u64).clamp(1, n)
            }
            TechniqueKind::Gss => ceil_div(r, pu),
            TechniqueKind::Tss => tss_first.saturating_sub(k * tss_dec).max(1),
            TechniqueKind::Rand => {
                let lo = (n / (100 * pu)).max(1);
                let hi = (n / (2 * pu)).max(lo);
                let x = rng.next_u64() as u128;
                lo + ((x * (hi - lo + 1) as u128) >> 64) as u64
            }
            TechniqueKind::Fac => batch_c.min(batch_left),
            TechniqueKind::Af => match pes[pe].moments() {
                None => batch_c.min(batch_left),
                Some((mu_p, _)) => {
                    let known: Vec<(f64, f64)> = pes.iter().filter_map(|x| x.moments()).collect();
                    let mmu = known.iter().map(|m| m.0).sum::<f64>() / known.len() as f64;
                    let msig = known.iter().map(|m| m.1).sum::<f64>() / known.len() as f64;
                    let mut d = 0.0;
                    let mut inv = 0.0;
                    for q in &pes {
                        let (mu, sig) = q.moments().unwrap_or((mmu, msig));
                        let mu = mu.max(1e-12);
                        d += sig * sig / mu;
                        inv += 1.0 / mu;
                    }
                    let tt = r as f64 / inv;
                    let x = (d + 2.0 * tt - (d * d + 4.0 * d * tt).sqrt()) / (2.0 * mu_p.max(1e-12));
                    if x > 0.0 {
                        x.ceil() as u64
                    } else {
                        0
                    }
                }
            },
            // WF and the AWF family
            _ => {
                let share = w[pe] * batch_c as f64;
                let rounded = if share > 0.0 { (share + 0.5).floor() as u64 } else { 0 };
                rounded.min(batch_left)
            }
        };

        let size = rule.max(min_chunk).min(r);
        out.push((pe, n - r, size));
        r -= size;
        k += 1;

        if batched {
            batch_left = batch_left.saturating_sub(size).min(r);
        }

        // report right away
        let (exec, sched) = observed_times(pe, k - 1, size);
        pes[pe].samples.push((size, exec, sched));
        let with_sched = matches!(t, TechniqueKind::AwfD | TechniqueKind::AwfE);
        let refresh = match t {
            TechniqueKind::AwfC | TechniqueKind::AwfE => true,
            TechniqueKind::AwfB | TechniqueKind::AwfD => batch_left == 0,
            _ => false,
        };
        if refresh {
            let times: Vec<Option<f64>> = pes.iter().map(|x| x.chunk_weighted(with_sched)).collect();
            if let Some(nw) = weights_from(&times) {
                w = nw;
            }
        }
    }
    out
}

/// Ten-line GSS: repeatedly take `ceil(R/P)`.
pub fn gss_sizes(n: u64, p: u64) -> Vec<u64> {
    let mut r = n;
    let mut v = Vec::new();
    while r > 0 {
        let s = (r + p - 1) / p;
        v.push(s);
        r -= s;
    }
    v
}

/// Practical FAC: each batch is P chunks of `ceil(ceil(R/2)/P)`.
pub fn fac_sizes(n: u64, p: u64) -> Vec<u64> {
    let mut r = n;
    let mut v = Vec::new();
    while r > 0 {
        let c = ((r + 1) / 2 + p - 1) / p;
        for _ in 0..p {
            if r == 0 {
                break;
            }
            let s = c.min(r);
            v.push(s);
            r -= s;
        }
    }
    v
}
