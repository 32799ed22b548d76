//! Master service loop, run on rank 0's control thread.

use std::collections::VecDeque;

use dls_core::{ChunkAssignment, FscParams, Scheduler, SchedulerOptions, TechniqueKind};

use crate::message::Message;
use crate::transport::{Inbound, MasterEnd};
use crate::{ProcChunk, RuntimeError};

pub(crate) struct MasterConfig {
    pub technique: TechniqueKind,
    pub n: u64,
    pub p: usize,
    pub min_chunk: u64,
    pub seed: u64,
    pub fsc: Option<FscParams<f64>>,
    pub serialize: bool,
}

pub(crate) struct MasterOutcome {
    pub scheduler: Option<Scheduler<f64>>,
    pub log: Vec<ProcChunk>,
    pub result: Result<(), RuntimeError>,
}

enum Served {
    Assigned,
    Terminated,
    Parked,
}

struct Master<'a> {
    cfg: &'a MasterConfig,
    sched: Scheduler<f64>,
    holding: Vec<Option<ChunkAssignment>>,
    waiting: Vec<bool>,
    queue: VecDeque<usize>,
    terminated: Vec<bool>,
    done: usize,
    turn: usize,
    log: Vec<ProcChunk>,
}

pub(crate) fn run_master(cfg: &MasterConfig, end: &mut MasterEnd, prev: Option<&Scheduler<f64>>) -> MasterOutcome {
    let opts = SchedulerOptions {
        min_chunk: cfg.min_chunk,
        seed: cfg.seed,
        fsc_params: cfg.fsc,
        initial_weights: None,
    };
    let mut sched = match Scheduler::new(cfg.technique, cfg.n, cfg.p, opts) {
        Ok(s) => s,
        Err(e) => return abort_all(cfg.p, end, None, Vec::new(), e.into()),
    };
    if let Some(prev) = prev {
        if cfg.technique.is_awf_family() {
            if let Err(e) = prev.carry_weights_into(&mut sched) {
                return abort_all(cfg.p, end, Some(sched), Vec::new(), e.into());
            }
        }
    }
    let mut m = Master {
        cfg,
        sched,
        holding: vec![None; cfg.p],
        waiting: vec![false; cfg.p],
        queue: VecDeque::new(),
        terminated: vec![false; cfg.p],
        done: 0,
        turn: 0,
        log: Vec::new(),
    };
    match m.serve_all(end) {
        Ok(()) => MasterOutcome {
            scheduler: Some(m.sched),
            log: m.log,
            result: Ok(()),
        },
        Err(e) => {
            let p = cfg.p;
            for r in (0..p).filter(|&r| !m.terminated[r]) {
                let _ = end.send(r, Message::Terminate { rank: r as u32 });
            }
            MasterOutcome {
                scheduler: Some(m.sched),
                log: m.log,
                result: Err(e),
            }
        }
    }
}

fn abort_all(
    p: usize,
    end: &mut MasterEnd,
    scheduler: Option<Scheduler<f64>>,
    log: Vec<ProcChunk>,
    e: RuntimeError,
) -> MasterOutcome {
    for r in 0..p {
        let _ = end.send(r, Message::Terminate { rank: r as u32 });
    }
    MasterOutcome {
        scheduler,
        log,
        result: Err(e),
    }
}

impl Master<'_> {
    fn serve_all(&mut self, end: &mut MasterEnd) -> Result<(), RuntimeError> {
        let p = self.cfg.p;
        while self.done < p {
            match end.recv()? {
                Inbound::Closed { rank, reason } => {
                    if rank < p && !self.terminated[rank] {
                        return Err(RuntimeError::Transport { rank, reason });
                    }
                }
                Inbound::Msg(msg) => self.handle(msg)?,
            }
            self.serve(end)?;
        }
        Ok(())
    }

    fn check_rank(&self, rank: u32, what: &str) -> Result<usize, RuntimeError> {
        let r = rank as usize;
        if r >= self.cfg.p {
            return Err(RuntimeError::ProtocolViolation(format!(
                "{what} from rank {rank}, but P = {}",
                self.cfg.p
            )));
        }
        if self.terminated[r] {
            return Err(RuntimeError::ProtocolViolation(format!(
                "{what} from terminated rank {rank}"
            )));
        }
        Ok(r)
    }

    fn handle(&mut self, msg: Message) -> Result<(), RuntimeError> {
        match msg {
            Message::WorkRequest { rank } => {
                let r = self.check_rank(rank, "work request")?;
                if self.waiting[r] || self.holding[r].is_some() {
                    return Err(RuntimeError::ProtocolViolation(format!(
                        "rank {r} requested work while not idle"
                    )));
                }
                self.waiting[r] = true;
                self.queue.push_back(r);
            }
            Message::CompletionReport {
                rank,
                start,
                size,
                exec_time,
                sched_time,
            } => {
                let r = self.check_rank(rank, "completion report")?;
                match self.holding[r].take() {
                    Some(c) if c.start == start && c.size == size => {
                        self.sched.report_completion(&c, exec_time, sched_time)?;
                    }
                    held => {
                        return Err(RuntimeError::ProtocolViolation(format!(
                            "unmatched completion report from rank {r} for [{start}, {}); holding {:?}",
                            start.saturating_add(size),
                            held.map(|c| c.range())
                        )))
                    }
                }
            }
            other => {
                return Err(RuntimeError::ProtocolViolation(format!(
                    "master received {other:?}"
                )))
            }
        }
        Ok(())
    }

    fn try_serve(&mut self, r: usize, end: &mut MasterEnd) -> Result<Served, RuntimeError> {
        match self.sched.next_chunk(r)? {
            Some(c) => {
                end.send(
                    r,
                    Message::WorkAssignment {
                        rank: r as u32,
                        start: c.start,
                        size: c.size,
                    },
                )?;
                self.log.push(ProcChunk {
                    rank: r,
                    start: c.start,
                    size: c.size,
                    batch_id: c.batch_id,
                    round: c.round,
                });
                self.holding[r] = Some(c);
                self.waiting[r] = false;
                Ok(Served::Assigned)
            }
            None if self.sched.is_exhausted() && self.sched.outstanding() == 0 => {
                end.send(r, Message::Terminate { rank: r as u32 })?;
                self.waiting[r] = false;
                self.terminated[r] = true;
                self.done += 1;
                Ok(Served::Terminated)
            }
            None => Ok(Served::Parked),
        }
    }

    fn serve(&mut self, end: &mut MasterEnd) -> Result<(), RuntimeError> {
        let p = self.cfg.p;
        if !self.cfg.serialize {
            for _ in 0..self.queue.len() {
                let Some(r) = self.queue.pop_front() else { break };
                if let Served::Parked = self.try_serve(r, end)? {
                    self.queue.push_back(r);
                }
            }
            return Ok(());
        }
        // cyclic turn order: wait for the rank whose turn it is
        let mut parked_in_a_row = 0;
        while self.done < p && parked_in_a_row < p {
            let r = self.turn;
            if self.terminated[r] {
                self.turn = (r + 1) % p;
                continue;
            }
            if !self.waiting[r] {
                break;
            }
            match self.try_serve(r, end)? {
                Served::Parked => parked_in_a_row += 1,
                _ => parked_in_a_row = 0,
            }
            self.turn = (r + 1) % p;
        }
        self.queue.retain(|&r| self.waiting[r]);
        Ok(())
    }
}
