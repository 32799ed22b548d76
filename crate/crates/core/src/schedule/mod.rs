//! Self-scheduling state machine.
//!
//! A [`Scheduler`] hands out contiguous chunks of a loop `[0, N)` to `P`
//! requesting PEs. It does no timing and no communication: callers feed back
//! measured chunk times through [`Scheduler::report_completion`], and the
//! adaptive techniques turn those into weights or chunk sizes.

mod perf;
pub mod rules;

use std::collections::BTreeMap;
use std::ops::Range;

pub use perf::{normalize_weights, weights_from_times, ChunkSample, PerformanceRecord};

use crate::rng::ChunkRng;
use crate::scalar::{ceil_count, round_half_up, Real};
use crate::technique::TechniqueKind;
use rules::TssParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("missing parameter: {0}")]
    MissingParameter(&'static str),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
}

/// Scheduling overhead `h` and task-time standard deviation `sigma`, in
/// seconds, for FSC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FscParams<F> {
    pub overhead: F,
    pub sigma: F,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerOptions<F> {
    pub min_chunk: u64,
    pub seed: u64,
    pub fsc_params: Option<FscParams<F>>,
    pub initial_weights: Option<Vec<F>>,
}

impl<F> Default for SchedulerOptions<F> {
    fn default() -> Self {
        SchedulerOptions {
            min_chunk: 1,
            seed: 0,
            fsc_params: None,
            initial_weights: None,
        }
    }
}

/// Half-open range of iterations handed to one PE in one scheduling round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChunkAssignment {
    pub pe_id: usize,
    pub start: u64,
    pub size: u64,
    /// Factoring batch the chunk belongs to (1-based); 0 for unbatched techniques.
    pub batch_id: u64,
    /// Index of the scheduling round that produced this chunk.
    pub round: u64,
}

impl ChunkAssignment {
    pub fn end(&self) -> u64 {
        self.start + self.size
    }

    pub fn range(&self) -> Range<u64> {
        self.start..self.end()
    }
}

#[derive(Debug, Clone, Default)]
struct BatchTally {
    issued: u64,
    reported: u64,
    closed: bool,
}

/// Per-loop state of one self-scheduling instance.
#[derive(Debug, Clone)]
pub struct Scheduler<F: Real = f64> {
    technique: TechniqueKind,
    n: u64,
    p: usize,
    remaining: u64,
    min_chunk: u64,
    batch_remaining: u64,
    batch_chunk: u64,
    batch_id: u64,
    rounds: u64,
    weights: Vec<F>,
    stats: Vec<PerformanceRecord<F>>,
    rng: ChunkRng,
    seed: u64,
    tss: TssParams,
    tss_issued: u64,
    fixed_chunk: u64,
    fsc_params: Option<FscParams<F>>,
    static_issued: Vec<bool>,
    outstanding: BTreeMap<u64, ChunkAssignment>,
    batches: BTreeMap<u64, BatchTally>,
}

fn weight_tolerance<F: Real>(p: usize) -> F {
    F::lit(1e-9).max(F::epsilon() * F::lit(8.0)) * F::count(p as u64)
}

impl<F: Real> Scheduler<F> {
    pub fn new(
        technique: TechniqueKind,
        n: u64,
        p: usize,
        options: SchedulerOptions<F>,
    ) -> Result<Self, ScheduleError> {
        if n == 0 {
            return Err(ScheduleError::InvalidArgument("N must be at least 1".into()));
        }
        if p == 0 {
            return Err(ScheduleError::InvalidArgument("P must be at least 1".into()));
        }
        let pu = p as u64;

        let fsc_params = options.fsc_params;
        let fixed_chunk = match technique {
            TechniqueKind::Fsc => {
                let fp = fsc_params.ok_or(ScheduleError::MissingParameter("fsc_params"))?;
                if !(fp.overhead > F::zero() && fp.sigma > F::zero())
                    || !fp.overhead.is_finite()
                    || !fp.sigma.is_finite()
                {
                    return Err(ScheduleError::InvalidArgument(
                        "FSC overhead and sigma must be positive and finite".into(),
                    ));
                }
                rules::fsc_chunk(n, pu, fp.overhead, fp.sigma)
            }
            TechniqueKind::Mfsc => rules::mfsc_chunk(n, pu),
            TechniqueKind::Static => rules::static_chunk(n, pu),
            _ => 0,
        };

        let weights = match options.initial_weights {
            Some(w) => {
                if w.len() != p {
                    return Err(ScheduleError::InvalidArgument(format!(
                        "{} initial weights for {} PEs",
                        w.len(),
                        p
                    )));
                }
                if w.iter().any(|&x| !(x > F::zero()) || !x.is_finite()) {
                    return Err(ScheduleError::InvalidArgument(
                        "initial weights must be positive".into(),
                    ));
                }
                let sum: F = w.iter().copied().sum();
                if (sum - F::count(pu)).abs() > weight_tolerance(p) {
                    return Err(ScheduleError::InvalidArgument(format!(
                        "initial weights sum to {sum}, expected {p}"
                    )));
                }
                w
            }
            None => vec![F::one(); p],
        };

        Ok(Scheduler {
            technique,
            n,
            p,
            remaining: n,
            min_chunk: options.min_chunk.max(1),
            batch_remaining: 0,
            batch_chunk: 0,
            batch_id: 0,
            rounds: 0,
            weights,
            stats: (0..p).map(PerformanceRecord::new).collect(),
            rng: ChunkRng::new(options.seed),
            seed: options.seed,
            tss: TssParams::new(n, pu),
            tss_issued: 0,
            fixed_chunk,
            fsc_params,
            static_issued: vec![false; p],
            outstanding: BTreeMap::new(),
            batches: BTreeMap::new(),
        })
    }

    pub fn technique(&self) -> TechniqueKind {
        self.technique
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn pe_count(&self) -> usize {
        self.p
    }

    pub fn remaining(&self) -> u64 {
        self.remaining
    }

    pub fn min_chunk(&self) -> u64 {
        self.min_chunk
    }

    pub fn batch_remaining(&self) -> u64 {
        self.batch_remaining
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining == 0
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn stats(&self) -> &[PerformanceRecord<F>] {
        &self.stats
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Chunks issued and not yet reported.
    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    pub fn fsc_params(&self) -> Option<FscParams<F>> {
        self.fsc_params
    }

    /// Next chunk for `pe_id`, or `None` once nothing is left for it.
    ///
    /// For every technique but STATIC, `None` means `R = 0`. STATIC hands
    /// each PE its own block `[p*ceil(N/P), ...)` exactly once.
    pub fn next_chunk(&mut self, pe_id: usize) -> Result<Option<ChunkAssignment>, ScheduleError> {
        if pe_id >= self.p {
            return Err(ScheduleError::InvalidArgument(format!(
                "PE {pe_id} out of range for P = {}",
                self.p
            )));
        }
        if self.remaining == 0 {
            return Ok(None);
        }

        let (start, size) = if self.technique == TechniqueKind::Static {
            if self.static_issued[pe_id] {
                return Ok(None);
            }
            self.static_issued[pe_id] = true;
            let start = pe_id as u64 * self.fixed_chunk;
            if start >= self.n {
                return Ok(None);
            }
            (start, self.fixed_chunk.min(self.n - start))
        } else {
            let size = self.rule_size(pe_id).max(self.min_chunk).min(self.remaining);
            (self.n - self.remaining, size)
        };

        self.remaining -= size;
        if self.technique.is_batched() {
            self.batch_remaining = self.batch_remaining.saturating_sub(size).min(self.remaining);
            let closed = self.batch_remaining == 0;
            let tally = self.batches.entry(self.batch_id).or_default();
            tally.issued += 1;
            tally.closed = closed;
        }
        if self.technique == TechniqueKind::Tss {
            self.tss_issued += 1;
        }

        let chunk = ChunkAssignment {
            pe_id,
            start,
            size,
            batch_id: if self.technique.is_batched() {
                self.batch_id
            } else {
                0
            },
            round: self.rounds,
        };
        self.rounds += 1;
        self.outstanding.insert(start, chunk);
        Ok(Some(chunk))
    }

    fn open_batch_if_needed(&mut self) {
        if self.batch_remaining == 0 {
            let batch = rules::fac_batch(self.remaining);
            self.batch_chunk = rules::div_ceil(batch, self.p as u64);
            self.batch_remaining = (self.batch_chunk * self.p as u64).min(self.remaining);
            self.batch_id += 1;
        }
    }

    fn rule_size(&mut self, pe_id: usize) -> u64 {
        let p = self.p as u64;
        match self.technique {
            TechniqueKind::Static => unreachable!("handled by caller"),
            TechniqueKind::Ss => 1,
            TechniqueKind::Fsc | TechniqueKind::Mfsc => self.fixed_chunk,
            TechniqueKind::Gss => rules::gss_chunk(self.remaining, p),
            TechniqueKind::Tss => self.tss.chunk(self.tss_issued),
            TechniqueKind::Rand => {
                let (lo, hi) = rules::rand_bounds(self.n, p);
                self.rng.uniform_inclusive(lo, hi)
            }
            TechniqueKind::Fac => {
                self.open_batch_if_needed();
                self.batch_chunk.min(self.batch_remaining)
            }
            TechniqueKind::Wf
            | TechniqueKind::Awf
            | TechniqueKind::AwfB
            | TechniqueKind::AwfC
            | TechniqueKind::AwfD
            | TechniqueKind::AwfE => {
                self.open_batch_if_needed();
                let share = self.weights[pe_id] * F::count(self.batch_chunk);
                round_half_up(share).min(self.batch_remaining)
            }
            TechniqueKind::Af => {
                self.open_batch_if_needed();
                match self.af_size(pe_id) {
                    Some(s) => s,
                    None => self.batch_chunk.min(self.batch_remaining),
                }
            }
        }
    }

    fn af_size(&self, pe_id: usize) -> Option<u64> {
        let (mu_p, _) = self.stats[pe_id].iteration_time_moments()?;
        let moments: Vec<(F, F)> = self
            .stats
            .iter()
            .filter_map(|s| s.iteration_time_moments())
            .collect();
        let k = F::count(moments.len() as u64);
        let mean_mu = moments.iter().map(|m| m.0).sum::<F>() / k;
        let mean_sigma = moments.iter().map(|m| m.1).sum::<F>() / k;
        let floor = perf::time_floor::<F>();

        let mut d = F::zero();
        let mut inv_sum = F::zero();
        for s in &self.stats {
            let (mu, sigma) = s.iteration_time_moments().unwrap_or((mean_mu, mean_sigma));
            let mu = mu.max(floor);
            d += sigma * sigma / mu;
            inv_sum += F::one() / mu;
        }
        let t = F::count(self.remaining) / inv_sum;
        Some(ceil_count(rules::af_chunk(mu_p.max(floor), d, t)))
    }

    /// Feed back the measured execution and scheduling time of a chunk.
    pub fn report_completion(
        &mut self,
        assignment: &ChunkAssignment,
        exec_time: F,
        sched_time: F,
    ) -> Result<(), ScheduleError> {
        match self.outstanding.get(&assignment.start) {
            Some(issued) if issued == assignment => {}
            Some(_) => {
                return Err(ScheduleError::ProtocolViolation(format!(
                    "report for chunk at {} does not match the issued chunk",
                    assignment.start
                )))
            }
            None => {
                return Err(ScheduleError::ProtocolViolation(format!(
                    "chunk at {} was not issued or was already reported",
                    assignment.start
                )))
            }
        }
        for t in [exec_time, sched_time] {
            if !(t >= F::zero()) || !t.is_finite() {
                return Err(ScheduleError::InvalidArgument(format!(
                    "times must be finite and non-negative, got {t}"
                )));
            }
        }
        self.outstanding.remove(&assignment.start);

        let with_sched = self.technique.counts_sched_time();
        self.stats[assignment.pe_id].record(assignment.size, exec_time, sched_time, with_sched);

        match self.technique {
            TechniqueKind::AwfC | TechniqueKind::AwfE => self.refresh_chunk_weights(),
            TechniqueKind::AwfB | TechniqueKind::AwfD => {
                if let Some(tally) = self.batches.get_mut(&assignment.batch_id) {
                    tally.reported += 1;
                    if tally.closed && tally.reported == tally.issued {
                        self.batches.remove(&assignment.batch_id);
                        self.refresh_chunk_weights();
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn refresh_chunk_weights(&mut self) {
        let times: Vec<Option<F>> = self.stats.iter().map(|s| s.chunk_weighted_time()).collect();
        if let Some(w) = weights_from_times(&times) {
            self.weights = w;
        }
    }

    /// Close a time-step: fold this loop's per-iteration times into each
    /// PE's history and recompute weights from the step-weighted averages.
    pub fn update_weights_timestep(&mut self, timestep_index: u64) -> Result<Vec<F>, ScheduleError> {
        if !self.technique.is_awf_family() {
            return Err(ScheduleError::InvalidArgument(format!(
                "{} does not learn time-step weights",
                self.technique
            )));
        }
        let with_sched = self.technique.counts_sched_time();
        let step_weight = timestep_index + 1;
        let mut any = false;
        for s in &mut self.stats {
            if let Some(tau) = s.loop_iteration_time(with_sched) {
                s.timestep_times.push((step_weight, tau));
                any = true;
            }
        }
        if !any && self.stats.iter().all(|s| s.timestep_times.is_empty()) {
            return Err(ScheduleError::InvalidArgument(
                "no completed time-step statistics".into(),
            ));
        }
        let times: Vec<Option<F>> = self
            .stats
            .iter()
            .map(|s| s.timestep_weighted_time())
            .collect();
        for (s, t) in self.stats.iter_mut().zip(&times) {
            if let Some(t) = t {
                s.timestep_wap.push(*t);
            }
        }
        if let Some(w) = weights_from_times(&times) {
            self.weights = w;
        }
        Ok(self.weights.clone())
    }

    /// Start `next` from the weights and time-step history learned by `self`.
    pub fn carry_weights_into(&self, next: &mut Scheduler<F>) -> Result<(), ScheduleError> {
        carry_weights(self, next)
    }
}

/// Copy the final weights and time-step history of one time-step's scheduler
/// into the next one's.
pub fn carry_weights<F: Real>(prev: &Scheduler<F>, next: &mut Scheduler<F>) -> Result<(), ScheduleError> {
    if prev.p != next.p {
        return Err(ScheduleError::InvalidArgument(format!(
            "cannot carry weights from P = {} to P = {}",
            prev.p, next.p
        )));
    }
    if prev.technique != next.technique || !prev.technique.is_awf_family() {
        return Err(ScheduleError::InvalidArgument(format!(
            "weights carry between AWF-family schedulers of one technique, got {} -> {}",
            prev.technique, next.technique
        )));
    }
    next.weights = prev.weights.clone();
    for (dst, src) in next.stats.iter_mut().zip(&prev.stats) {
        dst.timestep_wap = src.timestep_wap.clone();
        dst.timestep_times = src.timestep_times.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests;
