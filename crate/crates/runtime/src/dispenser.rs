//! Thread-level self-scheduling over one rank's process-level chunk.

use std::sync::Mutex;

use dls_core::{ChunkAssignment, FscParams, ScheduleError, Scheduler, SchedulerOptions, TechniqueKind};

/// A sub-chunk executed by one thread, in global loop indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ThreadChunk {
    pub rank: usize,
    pub thread: usize,
    pub start: u64,
    pub size: u64,
    /// Start of the enclosing process-level chunk.
    pub proc_start: u64,
}

/// A sub-chunk handed out by [`ThreadDispenser::next`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubChunk {
    pub start: u64,
    pub size: u64,
    assignment: ChunkAssignment,
}

impl SubChunk {
    pub fn range(&self) -> std::ops::Range<u64> {
        self.start..self.start + self.size
    }
}

struct State {
    base: u64,
    scheduler: Option<Scheduler<f64>>,
    aborted: bool,
    log: Vec<ThreadChunk>,
}

/// Shared dispenser of one rank. Every call takes the lock once, so issue
/// is linearizable.
pub struct ThreadDispenser {
    rank: usize,
    threads: usize,
    technique: TechniqueKind,
    min_chunk: u64,
    fsc: Option<FscParams<f64>>,
    seed: u64,
    state: Mutex<State>,
}

impl ThreadDispenser {
    pub fn new(
        rank: usize,
        threads: usize,
        technique: TechniqueKind,
        min_chunk: u64,
        fsc: Option<FscParams<f64>>,
        seed: u64,
    ) -> Self {
        ThreadDispenser {
            rank,
            threads,
            technique,
            min_chunk,
            fsc,
            seed,
            state: Mutex::new(State {
                base: 0,
                scheduler: None,
                aborted: false,
                log: Vec::new(),
            }),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Start dispensing `[start, start + size)`.
    pub fn bind(&self, start: u64, size: u64) -> Result<(), ScheduleError> {
        let opts = SchedulerOptions {
            min_chunk: self.min_chunk,
            seed: self.seed ^ start.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (self.rank as u64).rotate_left(32),
            fsc_params: self.fsc,
            initial_weights: None,
        };
        let s = Scheduler::new(self.technique, size, self.threads, opts)?;
        let mut st = self.lock();
        st.base = start;
        st.scheduler = Some(s);
        Ok(())
    }

    /// Stop issuing work for the current chunk.
    pub fn abort(&self) {
        self.lock().aborted = true;
    }

    pub fn is_aborted(&self) -> bool {
        self.lock().aborted
    }

    /// Next sub-chunk for `thread`, after reporting the one it finished (with
    /// its execution time) if any. `None` once the bound chunk is exhausted
    /// for this thread.
    pub fn next(&self, thread: usize, finished: Option<(SubChunk, f64)>) -> Option<SubChunk> {
        let mut st = self.lock();
        if st.aborted {
            return None;
        }
        let base = st.base;
        let sched = st.scheduler.as_mut()?;
        if let Some((done, exec)) = finished {
            // the assignment came from this scheduler, so the report matches
            let _ = sched.report_completion(&done.assignment, exec.max(0.0), 0.0);
        }
        let c = sched.next_chunk(thread).ok().flatten()?;
        let sub = SubChunk {
            start: base + c.start,
            size: c.size,
            assignment: c,
        };
        st.log.push(ThreadChunk {
            rank: self.rank,
            thread,
            start: sub.start,
            size: sub.size,
            proc_start: base,
        });
        Some(sub)
    }

    pub fn take_log(&self) -> Vec<ThreadChunk> {
        std::mem::take(&mut self.lock().log)
    }
}

/// Next sub-chunk of `dispenser` for `thread_id`.
pub fn thread_dispense(dispenser: &ThreadDispenser, thread_id: usize) -> Option<SubChunk> {
    dispenser.next(thread_id, None)
}
