//! One worker rank: a leader thread that talks to the master and `T - 1`
//! helpers, all executing sub-chunks from a shared dispenser.
//!
//! Per process-level chunk the team passes two barriers: after the leader
//! has bound the chunk (A) and after every thread has run dry (B). A task
//! panic is caught, aborts the dispenser and surfaces at B, so no thread is
//! left waiting on a barrier.

use std::any::Any;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Barrier, Mutex};
use std::thread;
use std::time::Instant;

use dls_core::schedule::rules::static_chunk;
use dls_core::trace::{EventKind, TraceEvent};

use crate::dispenser::{ThreadChunk, ThreadDispenser};
use crate::message::Message;
use crate::plan::RunPlan;
use crate::transport::WorkerEnd;
use crate::TaskContext;

#[derive(Clone, Copy)]
pub(crate) struct Clock(Instant);

impl Clock {
    pub fn start() -> Self {
        Clock(Instant::now())
    }

    pub fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

pub(crate) struct RankOutput {
    pub events: Vec<TraceEvent>,
    pub sched_time: f64,
    pub failure: Option<String>,
    /// Process-level chunks executed, in order.
    pub chunks: Vec<(u64, u64)>,
    pub thread_log: Vec<ThreadChunk>,
}

struct Team {
    rank: usize,
    timestep: u64,
    dispenser: ThreadDispenser,
    barrier: Barrier,
    stop: Mutex<bool>,
    failure: Mutex<Option<String>>,
    clock: Clock,
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "task panicked".into()
    }
}

impl Team {
    fn fail(&self, msg: String) {
        let mut f = self.failure.lock().unwrap_or_else(|e| e.into_inner());
        f.get_or_insert(msg);
    }

    fn failure(&self) -> Option<String> {
        self.failure.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    fn set_stop(&self) {
        *self.stop.lock().unwrap_or_else(|e| e.into_inner()) = true;
    }

    fn stopped(&self) -> bool {
        *self.stop.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn ev(&self, thread: usize, kind: EventKind, chunk: Option<(u64, u64)>) -> TraceEvent {
        TraceEvent::thread(self.rank as u32, thread as u32, kind, self.clock.now(), chunk)
    }

    /// Drain the dispenser, then wait at barrier B.
    fn work<F>(&self, thread: usize, task: &F, events: &mut Vec<TraceEvent>)
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        let ctx = TaskContext {
            rank: self.rank,
            thread,
            timestep: self.timestep,
        };
        let mut last = None;
        while let Some(c) = self.dispenser.next(thread, last.take()) {
            let span = Some((c.start, c.size));
            let start = self.ev(thread, EventKind::ChunkStart, span);
            events.push(start);
            let res = catch_unwind(AssertUnwindSafe(|| {
                for i in c.range() {
                    task(i, &ctx);
                }
            }));
            let end = self.ev(thread, EventKind::ChunkEnd, span);
            events.push(end);
            if let Err(p) = res {
                self.fail(format!("rank {} thread {thread}: {}", self.rank, panic_message(p)));
                self.dispenser.abort();
                break;
            }
            last = Some((c, end.t - start.t));
        }
        events.push(self.ev(thread, EventKind::WaitStart, None));
        self.barrier.wait();
        events.push(self.ev(thread, EventKind::WaitEnd, None));
    }

    fn helper<F>(&self, thread: usize, task: &F) -> Vec<TraceEvent>
    where
        F: Fn(u64, &TaskContext) + Sync,
    {
        let mut events = Vec::new();
        loop {
            self.barrier.wait();
            if self.stopped() {
                break;
            }
            self.work(thread, task, &mut events);
        }
        events
    }
}

enum Source<'a> {
    Master(&'a mut WorkerEnd),
    /// One static block, no master.
    Block(Option<(u64, u64)>),
}

pub(crate) fn run_rank<F>(
    rank: usize,
    plan: &RunPlan,
    link: Option<&mut WorkerEnd>,
    task: &F,
    clock: Clock,
    timestep: Option<u64>,
) -> RankOutput
where
    F: Fn(u64, &TaskContext) + Sync,
{
    let team = Team {
        rank,
        timestep: timestep.unwrap_or(0),
        dispenser: ThreadDispenser::new(
            rank,
            plan.t,
            plan.thread_technique,
            plan.thread_min_chunk,
            plan.thread_fsc,
            plan.seed,
        ),
        barrier: Barrier::new(plan.t),
        stop: Mutex::new(false),
        failure: Mutex::new(None),
        clock,
    };
    let source = match link {
        Some(l) => Source::Master(l),
        None => {
            let c = static_chunk(plan.n, plan.p as u64);
            let start = rank as u64 * c;
            Source::Block((start < plan.n).then(|| (start, c.min(plan.n - start))))
        }
    };

    thread::scope(|s| {
        let helpers: Vec<_> = (1..plan.t)
            .map(|t| {
                let team = &team;
                thread::Builder::new()
                    .name(format!("dls-r{rank}-t{t}"))
                    .spawn_scoped(s, move || team.helper(t, task))
                    .expect("spawn compute thread")
            })
            .collect();
        let mut out = leader(&team, source, task, timestep);
        for h in helpers {
            match h.join() {
                Ok(ev) => out.events.extend(ev),
                Err(p) => team.fail(panic_message(p)),
            }
        }
        out.failure = team.failure();
        out.thread_log = team.dispenser.take_log();
        out
    })
}

fn leader<F>(team: &Team, mut source: Source<'_>, task: &F, timestep: Option<u64>) -> RankOutput
where
    F: Fn(u64, &TaskContext) + Sync,
{
    let rank = team.rank;
    let proc_ev = |kind, chunk| TraceEvent::process(rank as u32, kind, team.clock.now(), chunk);
    let mut events = Vec::new();
    let mut sched_time = 0.0;
    let mut chunks = Vec::new();
    if timestep.is_some() {
        events.push(proc_ev(EventKind::TimestepStart, None));
    }
    loop {
        let mut chunk_sched = 0.0;
        let next = match &mut source {
            Source::Block(b) => Ok(b.take()),
            Source::Master(link) => {
                let ws = proc_ev(EventKind::WaitStart, None);
                events.push(ws);
                let reply = link
                    .send(Message::WorkRequest { rank: rank as u32 })
                    .and_then(|_| link.recv());
                let we = proc_ev(EventKind::WaitEnd, None);
                events.push(we);
                chunk_sched = we.t - ws.t;
                sched_time += chunk_sched;
                match reply {
                    Ok(Message::WorkAssignment { start, size, .. }) => Ok(Some((start, size))),
                    Ok(Message::Terminate { .. }) => Ok(None),
                    Ok(other) => Err(format!("rank {rank} received {other:?}")),
                    Err(e) => Err(e.to_string()),
                }
            }
        };
        let chunk = match next {
            Ok(Some((start, size))) => match team.dispenser.bind(start, size) {
                Ok(()) => Some((start, size)),
                Err(e) => {
                    team.fail(format!("rank {rank}: {e}"));
                    None
                }
            },
            Ok(None) => None,
            Err(e) => {
                team.fail(e);
                None
            }
        };
        let Some(span) = chunk else {
            if let (Some(f), Source::Master(link)) = (team.failure(), &mut source) {
                link.report_failure(f);
            }
            team.set_stop();
            team.barrier.wait();
            break;
        };
        events.push(proc_ev(EventKind::ChunkStart, Some(span)));
        team.barrier.wait();
        let began = team.clock.now();
        team.work(0, task, &mut events);
        let end = proc_ev(EventKind::ChunkEnd, Some(span));
        events.push(end);
        chunks.push(span);

        if let Some(f) = team.failure() {
            if let Source::Master(link) = &mut source {
                link.report_failure(f);
            }
            team.set_stop();
            team.barrier.wait();
            break;
        }
        if let Source::Master(link) = &mut source {
            let report = Message::CompletionReport {
                rank: rank as u32,
                start: span.0,
                size: span.1,
                exec_time: end.t - began,
                sched_time: chunk_sched,
            };
            if let Err(e) = link.send(report) {
                team.fail(e.to_string());
                team.set_stop();
                team.barrier.wait();
                break;
            }
        }
    }
    if timestep.is_some() {
        events.push(proc_ev(EventKind::TimestepEnd, None));
    }
    RankOutput {
        events,
        sched_time,
        failure: None,
        chunks,
        thread_log: Vec::new(),
    }
}
