//! Run configuration.

use std::fmt;
use std::str::FromStr;

use dls_core::schedule::rules::half_mfsc_chunk;
use dls_core::{FscParams, ProcTechnique, TechniqueKind};

use crate::RuntimeError;

/// Environment variable naming the thread-level technique, optionally
/// followed by `,<min_chunk>` (e.g. `GSS,4`).
pub const THREAD_SCHEDULE_ENV: &str = "DLS_THREAD_SCHEDULE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    #[default]
    InProcess,
    LocalSocket,
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in-process" => Ok(Transport::InProcess),
            "local-socket" => Ok(Transport::LocalSocket),
            other => Err(format!("unknown transport `{other}` (in-process, local-socket)")),
        }
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transport::InProcess => "in-process",
            Transport::LocalSocket => "local-socket",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    /// Loop iterations `N`.
    pub n: u64,
    /// Worker ranks `P`.
    pub p: usize,
    /// Compute threads per rank `T`.
    pub t: usize,
    pub proc_technique: ProcTechnique,
    pub thread_technique: TechniqueKind,
    /// `None` selects half the mFSC chunk of `(N, P)`.
    pub proc_min_chunk: Option<u64>,
    pub thread_min_chunk: u64,
    pub timesteps: u64,
    pub transport: Transport,
    pub seed: u64,
    /// Required when `proc_technique` is FSC.
    pub proc_fsc: Option<FscParams<f64>>,
    /// Required when `thread_technique` is FSC.
    pub thread_fsc: Option<FscParams<f64>>,
    /// Serve requests in cyclic rank order instead of arrival order, making
    /// the process-level chunk log independent of timing for non-adaptive
    /// techniques.
    pub serialize_requests: bool,
}

impl RunPlan {
    pub fn new(n: u64, p: usize, t: usize, proc_technique: ProcTechnique, thread_technique: TechniqueKind) -> Self {
        RunPlan {
            n,
            p,
            t,
            proc_technique,
            thread_technique,
            proc_min_chunk: None,
            thread_min_chunk: 1,
            timesteps: 1,
            transport: Transport::InProcess,
            seed: 0,
            proc_fsc: None,
            thread_fsc: None,
            serialize_requests: false,
        }
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let bad = |m: String| Err(RuntimeError::InvalidPlan(m));
        if self.n == 0 {
            return bad("N must be at least 1".into());
        }
        if self.p == 0 || self.t == 0 {
            return bad(format!("P and T must be at least 1, got P = {}, T = {}", self.p, self.t));
        }
        if self.p > u32::MAX as usize {
            return bad(format!("P = {} exceeds the wire format's rank range", self.p));
        }
        if self.timesteps == 0 {
            return bad("timesteps must be at least 1".into());
        }
        if self.thread_min_chunk == 0 {
            return bad("thread_min_chunk must be at least 1".into());
        }
        if let Some(m) = self.proc_min_chunk {
            if m < self.thread_min_chunk {
                return bad(format!(
                    "proc_min_chunk {m} is below thread_min_chunk {}",
                    self.thread_min_chunk
                ));
            }
        }
        if self.proc_technique == ProcTechnique::Dls(TechniqueKind::Fsc) && self.proc_fsc.is_none() {
            return bad("process-level FSC needs overhead and sigma".into());
        }
        if self.thread_technique == TechniqueKind::Fsc && self.thread_fsc.is_none() {
            return bad("thread-level FSC needs overhead and sigma".into());
        }
        Ok(())
    }

    /// Process-level minimum chunk actually applied.
    pub fn effective_proc_min_chunk(&self) -> u64 {
        self.proc_min_chunk
            .unwrap_or_else(|| default_proc_min_chunk(self.n, self.p as u64).max(self.thread_min_chunk))
    }

    /// Override the thread-level technique (and minimum chunk) from
    /// [`THREAD_SCHEDULE_ENV`] when it is set. Returns whether it was.
    pub fn apply_thread_schedule_env(&mut self) -> Result<bool, RuntimeError> {
        match std::env::var(THREAD_SCHEDULE_ENV) {
            Ok(v) => {
                let (t, m) = parse_thread_schedule(&v)?;
                self.thread_technique = t;
                if let Some(m) = m {
                    self.thread_min_chunk = m;
                }
                Ok(true)
            }
            Err(std::env::VarError::NotPresent) => Ok(false),
            Err(e) => Err(RuntimeError::InvalidPlan(format!("{THREAD_SCHEDULE_ENV}: {e}"))),
        }
    }
}

/// Half the mFSC chunk, the default process-level minimum chunk.
pub fn default_proc_min_chunk(n: u64, p: u64) -> u64 {
    half_mfsc_chunk(n, p)
}

/// Parse `technique[,min_chunk]`.
pub fn parse_thread_schedule(s: &str) -> Result<(TechniqueKind, Option<u64>), RuntimeError> {
    let bad = |m: String| RuntimeError::InvalidPlan(format!("{THREAD_SCHEDULE_ENV}: {m}"));
    let mut parts = s.splitn(2, ',');
    let name = parts.next().unwrap_or("").trim();
    let technique = name.parse::<TechniqueKind>().map_err(|e| bad(e.to_string()))?;
    let min_chunk = match parts.next() {
        None => None,
        Some(m) => {
            let m = m
                .trim()
                .parse::<u64>()
                .map_err(|e| bad(format!("minimum chunk `{}`: {e}", m.trim())))?;
            if m == 0 {
                return Err(bad("minimum chunk must be at least 1".into()));
            }
            Some(m)
        }
    };
    Ok((technique, min_chunk))
}
