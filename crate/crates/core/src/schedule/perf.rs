use crate::scalar::Real;

/// One completed chunk as seen by the scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkSample<F> {
    pub size: u64,
    pub exec_time: F,
    pub sched_time: F,
}

/// Per-PE execution statistics accumulated within one loop, plus the
/// per-time-step history that survives across loops for AWF.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRecord<F> {
    pub pe_id: usize,
    pub chunks_done: u64,
    pub iterations_done: u64,
    pub exec_time_sum: F,
    pub sched_time_sum: F,
    pub per_chunk_samples: Vec<ChunkSample<F>>,
    /// Weighted average per-iteration time after each completed time-step.
    pub timestep_wap: Vec<F>,
    /// `(step weight, per-iteration time)` of each time-step this PE took part in.
    pub timestep_times: Vec<(u64, F)>,
    // sum over chunks j of j * tau_j, for the chunk-weighted average
    chunk_weighted_sum: F,
    // Welford accumulators over per-iteration chunk times
    iter_mean: F,
    iter_m2: F,
}

/// Lower bound applied to per-iteration times before inverting them.
pub(crate) fn time_floor<F: Real>() -> F {
    F::lit(1e-12)
}

impl<F: Real> PerformanceRecord<F> {
    pub fn new(pe_id: usize) -> Self {
        PerformanceRecord {
            pe_id,
            chunks_done: 0,
            iterations_done: 0,
            exec_time_sum: F::zero(),
            sched_time_sum: F::zero(),
            per_chunk_samples: Vec::new(),
            timestep_wap: Vec::new(),
            timestep_times: Vec::new(),
            chunk_weighted_sum: F::zero(),
            iter_mean: F::zero(),
            iter_m2: F::zero(),
        }
    }

    pub(crate) fn record(&mut self, size: u64, exec_time: F, sched_time: F, with_sched: bool) {
        self.chunks_done += 1;
        self.iterations_done += size;
        self.exec_time_sum += exec_time;
        self.sched_time_sum += sched_time;
        self.per_chunk_samples.push(ChunkSample {
            size,
            exec_time,
            sched_time,
        });

        let busy = if with_sched {
            exec_time + sched_time
        } else {
            exec_time
        };
        let tau = busy / F::count(size);
        self.chunk_weighted_sum += F::count(self.chunks_done) * tau;

        let x = exec_time / F::count(size);
        let delta = x - self.iter_mean;
        self.iter_mean += delta / F::count(self.chunks_done);
        self.iter_m2 += delta * (x - self.iter_mean);
    }

    /// `exec_time_sum / iterations_done`, if any iteration completed.
    pub fn mean_iteration_time(&self) -> Option<F> {
        (self.iterations_done > 0).then(|| self.exec_time_sum / F::count(self.iterations_done))
    }

    /// Per-iteration time of the loop so far, counting scheduling time when asked.
    pub fn loop_iteration_time(&self, with_sched: bool) -> Option<F> {
        (self.iterations_done > 0).then(|| {
            let busy = if with_sched {
                self.exec_time_sum + self.sched_time_sum
            } else {
                self.exec_time_sum
            };
            busy / F::count(self.iterations_done)
        })
    }

    /// Chunk-index weighted average of per-iteration times: later chunks
    /// count more (`sum(j * tau_j) / sum(j)`).
    pub fn chunk_weighted_time(&self) -> Option<F> {
        let k = self.chunks_done;
        (k > 0).then(|| self.chunk_weighted_sum / F::count(k * (k + 1) / 2))
    }

    /// Step-index weighted average over the time-step history.
    pub fn timestep_weighted_time(&self) -> Option<F> {
        let den: u64 = self.timestep_times.iter().map(|(w, _)| *w).sum();
        (den > 0).then(|| {
            let num: F = self
                .timestep_times
                .iter()
                .map(|&(w, tau)| F::count(w) * tau)
                .sum();
            num / F::count(den)
        })
    }

    /// Mean and population standard deviation of per-iteration chunk times,
    /// available once at least two chunks completed.
    pub fn iteration_time_moments(&self) -> Option<(F, F)> {
        (self.chunks_done >= 2).then(|| {
            let var = self.iter_m2 / F::count(self.chunks_done);
            (self.iter_mean, var.max(F::zero()).sqrt())
        })
    }
}

/// Relative weights from per-PE per-iteration times: faster PEs earn larger
/// weights, `w_p = P * (1/tau_p) / sum(1/tau_q)`. PEs without a measurement
/// get the mean rate of the measured ones. Returns `None` when nothing is
/// measured.
pub fn weights_from_times<F: Real>(times: &[Option<F>]) -> Option<Vec<F>> {
    let rates: Vec<Option<F>> = times
        .iter()
        .map(|t| t.map(|t| F::one() / t.max(time_floor())))
        .collect();
    let known: Vec<F> = rates.iter().flatten().copied().collect();
    if known.is_empty() {
        return None;
    }
    let fill = known.iter().copied().sum::<F>() / F::count(known.len() as u64);
    let rates: Vec<F> = rates.into_iter().map(|r| r.unwrap_or(fill)).collect();
    Some(normalize_weights(&rates))
}

/// Scale positive values so they sum to their count.
pub fn normalize_weights<F: Real>(values: &[F]) -> Vec<F> {
    let total: F = values.iter().copied().sum();
    let p = F::count(values.len() as u64);
    values.iter().map(|&v| p * v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_time_weights() {
        let w = weights_from_times(&[Some(1.0f64), Some(2.0)]).unwrap();
        assert!((w[0] - 4.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-12);
        let w = weights_from_times(&[Some(3.0f64), None]).unwrap();
        assert_eq!(w, vec![1.0, 1.0]);
        assert!(weights_from_times::<f64>(&[None, None]).is_none());
    }

    #[test]
    fn chunk_weighted_average_favours_recent() {
        let mut r = PerformanceRecord::<f64>::new(0);
        r.record(10, 10.0, 0.0, false); // tau 1
        r.record(10, 40.0, 0.0, false); // tau 4
        // (1*1 + 2*4) / 3 = 3
        assert!((r.chunk_weighted_time().unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(r.mean_iteration_time(), Some(2.5));
    }

    #[test]
    fn sched_time_folded_in_when_asked() {
        let mut r = PerformanceRecord::<f64>::new(0);
        r.record(4, 4.0, 4.0, true);
        assert_eq!(r.chunk_weighted_time(), Some(2.0));
        assert_eq!(r.loop_iteration_time(true), Some(2.0));
        assert_eq!(r.loop_iteration_time(false), Some(1.0));
    }

    #[test]
    fn moments() {
        let mut r = PerformanceRecord::<f64>::new(0);
        r.record(1, 1.0, 0.0, false);
        assert!(r.iteration_time_moments().is_none());
        r.record(1, 3.0, 0.0, false);
        let (mu, sigma) = r.iteration_time_moments().unwrap();
        assert!((mu - 2.0).abs() < 1e-12);
        assert!((sigma - 1.0).abs() < 1e-12);
    }
}
