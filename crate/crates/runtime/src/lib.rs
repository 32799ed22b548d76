//! Two-level self-scheduling runtime.
//!
//! `P` worker ranks request process-level chunks from a master that runs on a
//! control thread of rank 0; each rank's `T` compute threads share a
//! dispenser that self-schedules sub-chunks of the rank's current chunk.
//! Ranks talk to the master only through a [`Transport`]: in-process
//! channels or Unix domain sockets carrying the binary frames of
//! [`message`].
//!
//! ```
//! use dls_core::{ProcTechnique, TechniqueKind};
//! use dls_runtime::{setup, RunPlan};
//! use std::sync::atomic::{AtomicU64, Ordering};
//!
//! let plan = RunPlan::new(1000, 2, 2, ProcTechnique::Dls(TechniqueKind::Gss), TechniqueKind::Ss);
//! let mut rt = setup(plan).unwrap();
//! let sum = AtomicU64::new(0);
//! let result = rt.run_loop(&|i, _ctx| {
//!     sum.fetch_add(i, Ordering::Relaxed);
//! }).unwrap();
//! assert_eq!(sum.into_inner(), 999 * 1000 / 2);
//! assert_eq!(result.thread_chunks.len(), 1000);
//! ```

pub mod dispenser;
mod master;
pub mod message;
pub mod plan;
mod transport;
mod worker;

use std::thread;

use dls_core::metrics::{ImbalanceReport, MetricError};
use dls_core::trace::{EventKind, TraceEvent};
use dls_core::{ProcTechnique, ScheduleError, Scheduler, TechniqueKind};

pub use dispenser::{thread_dispense, SubChunk, ThreadChunk, ThreadDispenser};
pub use message::Message;
pub use plan::{default_proc_min_chunk, parse_thread_schedule, RunPlan, Transport, THREAD_SCHEDULE_ENV};

use master::{run_master, MasterConfig};
use transport::Links;
use worker::{run_rank, Clock};

#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("setup failed at rank {rank}: {reason}")]
    Setup { rank: usize, reason: String },
    #[error("transport failure at rank {rank}: {reason}")]
    Transport { rank: usize, reason: String },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("worker rank {rank} crashed: {message} ({} trace events kept)", partial_trace.len())]
    WorkerCrashed {
        rank: usize,
        message: String,
        partial_trace: Vec<TraceEvent>,
    },
    #[error("runtime was aborted by an earlier failure")]
    Aborted,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Where a task runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskContext {
    pub rank: usize,
    pub thread: usize,
    pub timestep: u64,
}

/// A process-level chunk in the order the master issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProcChunk {
    pub rank: usize,
    pub start: u64,
    pub size: u64,
    pub batch_id: u64,
    pub round: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub timestep: u64,
    /// Seconds from the start of the loop until every thread has joined.
    pub wall_time: f64,
    /// Last process-level `chunk_end` of each rank (0 if it got no work).
    pub rank_finish: Vec<f64>,
    /// Last sub-chunk end of each thread, per rank.
    pub thread_finish: Vec<Vec<f64>>,
    /// All events, ordered by time.
    pub trace: Vec<TraceEvent>,
    pub proc_chunks: Vec<ProcChunk>,
    /// Sub-chunks per rank in issue order, ranks in ascending order.
    pub thread_chunks: Vec<ThreadChunk>,
    /// Per rank, the summed request-to-assignment waits.
    pub proc_sched_time: Vec<f64>,
    /// Process-level weights after the loop (after the time-step update for
    /// AWF); all ones for techniques without weights.
    pub proc_weights: Vec<f64>,
}

impl RunResult {
    /// One process-level event per chunk plus one thread-level event per
    /// sub-chunk.
    pub fn scheduling_events(&self) -> usize {
        self.proc_chunks.len() + self.thread_chunks.len()
    }

    /// Iterations assigned to each rank at the process level.
    pub fn assigned_iterations(&self) -> Vec<u64> {
        let mut v = vec![0; self.rank_finish.len()];
        for c in &self.proc_chunks {
            v[c.rank] += c.size;
        }
        v
    }

    /// Imbalance of the rank finishing times.
    pub fn rank_imbalance(&self) -> Result<ImbalanceReport<f64>, MetricError> {
        ImbalanceReport::from_finish_times(&self.rank_finish)
    }
}

/// A connected runtime. Learned AWF weights persist across
/// [`RuntimeHandle::run_timesteps`] steps.
pub struct RuntimeHandle {
    plan: RunPlan,
    links: Links,
    poisoned: bool,
}

/// Validate `plan`, connect the transport and spawn nothing yet: ranks and
/// their threads live for the duration of each loop.
pub fn setup(plan: RunPlan) -> Result<RuntimeHandle, RuntimeError> {
    plan.validate()?;
    let links = transport::connect(plan.transport, plan.p)?;
    Ok(RuntimeHandle {
        plan,
        links,
        poisoned: false,
    })
}

impl RuntimeHandle {
    pub fn plan(&self) -> &RunPlan {
        &self.plan
    }

    /// Execute `task` once for every index of `[0, N)`.
    pub fn run_loop<F>(&mut self, task: &F) -> Result<RunResult, RuntimeError>
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        self.run_step(task, None, None).map(|(r, _)| r)
    }

    /// Run the loop `timesteps` times, carrying learned weights between steps
    /// for AWF-family techniques. Plain AWF also folds each step's timings
    /// into its weights; with one step its weights never change.
    pub fn run_timesteps<F>(&mut self, task: &F, timesteps: u64) -> Result<Vec<RunResult>, RuntimeError>
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        if timesteps == 0 {
            return Err(RuntimeError::InvalidPlan("timesteps must be at least 1".into()));
        }
        let mut prev: Option<Scheduler<f64>> = None;
        let mut out = Vec::with_capacity(timesteps as usize);
        for step in 0..timesteps {
            let (mut result, sched) = self.run_step(task, Some(step), prev.as_ref())?;
            if let Some(mut s) = sched {
                if s.technique() == TechniqueKind::Awf {
                    s.update_weights_timestep(step)?;
                }
                result.proc_weights = s.weights().to_vec();
                prev = Some(s);
            }
            out.push(result);
        }
        Ok(out)
    }

    /// [`run_timesteps`](Self::run_timesteps) with the plan's step count.
    pub fn run<F>(&mut self, task: &F) -> Result<Vec<RunResult>, RuntimeError>
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        let steps = self.plan.timesteps;
        self.run_timesteps(task, steps)
    }

    fn run_step<F>(
        &mut self,
        task: &F,
        timestep: Option<u64>,
        prev: Option<&Scheduler<f64>>,
    ) -> Result<(RunResult, Option<Scheduler<f64>>), RuntimeError>
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        if self.poisoned {
            return Err(RuntimeError::Aborted);
        }
        let plan = &self.plan;
        let master_cfg = match plan.proc_technique {
            ProcTechnique::Nodlb => None,
            ProcTechnique::Dls(technique) => Some(MasterConfig {
                technique,
                n: plan.n,
                p: plan.p,
                min_chunk: plan.effective_proc_min_chunk(),
                seed: plan.seed,
                fsc: plan.proc_fsc,
                serialize: plan.serialize_requests,
            }),
        };
        let clock = Clock::start();
        let Links { master, workers, .. } = &mut self.links;

        let (master_out, ranks) = thread::scope(|s| {
            let m = master_cfg.as_ref().map(|cfg| {
                thread::Builder::new()
                    .name("dls-master".into())
                    .spawn_scoped(s, move || run_master(cfg, master, prev))
                    .expect("spawn master thread")
            });
            let with_master = m.is_some();
            let handles: Vec<_> = workers
                .iter_mut()
                .enumerate()
                .map(|(r, w)| {
                    let link = with_master.then_some(w);
                    thread::Builder::new()
                        .name(format!("dls-rank-{r}"))
                        .spawn_scoped(s, move || run_rank(r, plan, link, task, clock, timestep))
                        .expect("spawn rank thread")
                })
                .collect();
            let ranks: Vec<_> = handles
                .into_iter()
                .map(|h| h.join().expect("rank threads catch task panics"))
                .collect();
            let master_out = m.map(|h| h.join().expect("master thread does not panic"));
            (master_out, ranks)
        });
        let wall_time = clock.now();

        let mut trace: Vec<TraceEvent> = ranks.iter().flat_map(|r| r.events.iter().copied()).collect();
        trace.sort_by(|a, b| a.t.total_cmp(&b.t));

        if let Some((rank, msg)) = ranks
            .iter()
            .enumerate()
            .find_map(|(r, o)| o.failure.clone().map(|m| (r, m)))
        {
            self.poisoned = true;
            return Err(RuntimeError::WorkerCrashed {
                rank,
                message: msg,
                partial_trace: trace,
            });
        }
        let (scheduler, proc_chunks) = match master_out {
            Some(out) => {
                if let Err(e) = out.result {
                    self.poisoned = true;
                    return Err(e);
                }
                (out.scheduler, out.log)
            }
            None => {
                let log = ranks
                    .iter()
                    .enumerate()
                    .flat_map(|(r, o)| {
                        o.chunks.iter().map(move |&(start, size)| ProcChunk {
                            rank: r,
                            start,
                            size,
                            batch_id: 0,
                            round: r as u64,
                        })
                    })
                    .collect();
                (None, log)
            }
        };

        let p = self.plan.p;
        let t = self.plan.t;
        let mut rank_finish = vec![0.0; p];
        let mut thread_finish = vec![vec![0.0; t]; p];
        for e in trace.iter().filter(|e| e.kind == EventKind::ChunkEnd) {
            let r = e.rank as usize;
            match e.thread {
                None => rank_finish[r] = e.t.max(rank_finish[r]),
                Some(th) => {
                    let slot = &mut thread_finish[r][th as usize];
                    *slot = e.t.max(*slot);
                }
            }
        }
        let proc_weights = scheduler
            .as_ref()
            .map(|s| s.weights().to_vec())
            .unwrap_or_else(|| vec![1.0; p]);
        let result = RunResult {
            timestep: timestep.unwrap_or(0),
            wall_time,
            rank_finish,
            thread_finish,
            trace,
            proc_chunks,
            thread_chunks: ranks.iter().flat_map(|r| r.thread_log.iter().copied()).collect(),
            proc_sched_time: ranks.iter().map(|r| r.sched_time).collect(),
            proc_weights,
        };
        Ok((result, scheduler))
    }
}
