//! The factorial sweep: every configured (process, thread) technique pair,
//! plus the NODLB/STATIC baseline, run strictly one cell at a time.
//!
//! Each finished cell is written to `cells/<proc>__<thread>.json` together
//! with a digest of the settings that produced it, so an interrupted or
//! repeated sweep reuses completed cells and recomputes only the rest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use dls_core::kernels::KernelError;
use dls_core::metrics::ImbalanceReport;
use dls_core::trace::{export_trace, TraceEvent, TraceFormat};
use dls_core::{ProcTechnique, TechniqueKind};
use dls_runtime::{setup, RunPlan, RunResult, RuntimeError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, ExperimentConfig, Measure, TraceMode};
use crate::stats::Stats;
use crate::workload::Workload;

pub const BASELINE: (ProcTechnique, TechniqueKind) = (ProcTechnique::Nodlb, TechniqueKind::Static);

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{needed} threads (P x T) exceed the {available} logical cores; pass --allow-oversubscribe to run anyway")]
    Oversubscribed { needed: usize, available: usize },
    #[error("kernel setup failed: {0}")]
    Kernel(#[from] KernelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Corrupt { path: PathBuf, msg: String },
}

/// One timed run of a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub repetition: u32,
    pub wall_time_s: f64,
    /// Imbalance of the rank finishing times; `None` when undefined.
    pub cov: Option<f64>,
    pub mean_max: Option<f64>,
    pub sched_events_proc: u64,
    pub sched_events_thread: u64,
    /// SHA-256 of the chunk decisions, independent of which thread ran what.
    pub chunk_log_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub proc_technique: ProcTechnique,
    pub thread_technique: TechniqueKind,
    pub config_digest: String,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

impl CellResult {
    pub fn key(&self) -> (ProcTechnique, TechniqueKind) {
        (self.proc_technique, self.thread_technique)
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none() && !self.measurements.is_empty()
    }

    /// Wall-time statistics; `None` for a failed cell.
    pub fn stats(&self) -> Option<Stats> {
        if !self.is_ok() {
            return None;
        }
        Stats::of(&self.measurements.iter().map(|m| m.wall_time_s).collect::<Vec<_>>())
    }
}

/// A technique pair with its wall-time statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub proc_technique: ProcTechnique,
    pub thread_technique: TechniqueKind,
    pub stats: Stats,
    /// Improvement of the mean over the baseline mean, in percent.
    pub improvement_pct: Option<f64>,
}

/// Baseline and best configuration per level of load balancing.
///
/// Selection is nested: the thread-level best is the fastest cell of the
/// NODLB row, the process-level best the fastest of the STATIC column and the
/// two-level best the fastest cell overall, so each candidate set contains
/// the previous ones and the reported means are ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    pub baseline: Option<Pick>,
    pub thread_level: Option<Pick>,
    pub proc_level: Option<Pick>,
    pub two_level: Option<Pick>,
}

/// Best cells restricted to disjoint categories: dynamic only at the thread
/// level, only at the process level, or at both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictComparison {
    pub thread_only: Option<Pick>,
    pub proc_only: Option<Pick>,
    pub both: Option<Pick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub config_digest: String,
    /// P x T exceeded the logical cores when the sweep ran.
    pub oversubscribed: bool,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    /// Process techniques in matrix order, NODLB first if it was not configured.
    pub fn rows(&self) -> Vec<ProcTechnique> {
        let mut v = self.config.proc_techniques.clone();
        if !v.contains(&BASELINE.0) {
            v.insert(0, BASELINE.0);
        }
        v
    }

    /// Thread techniques in matrix order, STATIC first if it was not configured.
    pub fn columns(&self) -> Vec<TechniqueKind> {
        let mut v = self.config.thread_techniques.clone();
        if !v.contains(&BASELINE.1) {
            v.insert(0, BASELINE.1);
        }
        v
    }

    pub fn cell(&self, proc: ProcTechnique, thread: TechniqueKind) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.key() == (proc, thread))
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(CellResult::is_ok)
    }

    pub fn failed_cells(&self) -> Vec<&CellResult> {
        self.cells.iter().filter(|c| !c.is_ok()).collect()
    }

    pub fn baseline_mean(&self) -> Option<f64> {
        self.cell(BASELINE.0, BASELINE.1)?.stats().map(|s| s.mean)
    }

    /// Percent improvement of a cell's mean over the baseline mean; exactly
    /// zero for the baseline itself.
    pub fn improvement(&self, proc: ProcTechnique, thread: TechniqueKind) -> Option<f64> {
        let mean = self.cell(proc, thread)?.stats()?.mean;
        if (proc, thread) == BASELINE {
            return Some(0.0);
        }
        let base = self.baseline_mean()?;
        Some(dls_core::percent_improvement(base, mean))
    }

    /// Rows of `(process technique, improvements per column)`.
    pub fn improvement_matrix(&self) -> Vec<(ProcTechnique, Vec<Option<f64>>)> {
        let cols = self.columns();
        self.rows()
            .into_iter()
            .map(|p| (p, cols.iter().map(|&t| self.improvement(p, t)).collect()))
            .collect()
    }

    fn pick(&self, c: &CellResult) -> Option<Pick> {
        Some(Pick {
            proc_technique: c.proc_technique,
            thread_technique: c.thread_technique,
            stats: c.stats()?,
            improvement_pct: self.improvement(c.proc_technique, c.thread_technique),
        })
    }

    /// Fastest mean among cells accepted by `keep`; ties go to the earlier
    /// cell in sweep order.
    pub fn best_where(&self, keep: impl Fn(ProcTechnique, TechniqueKind) -> bool) -> Option<Pick> {
        let mut best: Option<Pick> = None;
        for c in self.cells.iter().filter(|c| keep(c.proc_technique, c.thread_technique)) {
            if let Some(p) = self.pick(c) {
                if best.is_none_or(|b| p.stats.mean < b.stats.mean) {
                    best = Some(p);
                }
            }
        }
        best
    }

    /// The matrix argmin over mean times.
    pub fn winner(&self) -> Option<Pick> {
        self.best_where(|_, _| true)
    }

    pub fn level_comparison(&self) -> LevelComparison {
        LevelComparison {
            baseline: self.cell(BASELINE.0, BASELINE.1).and_then(|c| self.pick(c)),
            thread_level: self.best_where(|p, _| p == ProcTechnique::Nodlb),
            proc_level: self.best_where(|_, t| t == TechniqueKind::Static),
            two_level: self.winner(),
        }
    }

    pub fn strict_comparison(&self) -> StrictComparison {
        StrictComparison {
            thread_only: self.best_where(|p, t| p == ProcTechnique::Nodlb && t != TechniqueKind::Static),
            proc_only: self.best_where(|p, t| p != ProcTechnique::Nodlb && t == TechniqueKind::Static),
            both: self.best_where(|p, t| p != ProcTechnique::Nodlb && t != TechniqueKind::Static),
        }
    }
}

/// Configured pairs in row-major order, then the baseline if it is not
/// among them.
pub fn cell_keys(config: &ExperimentConfig) -> Vec<(ProcTechnique, TechniqueKind)> {
    let mut keys: Vec<_> = config
        .proc_techniques
        .iter()
        .flat_map(|&p| config.thread_techniques.iter().map(move |&t| (p, t)))
        .collect();
    if !keys.contains(&BASELINE) {
        keys.push(BASELINE);
    }
    keys
}

pub fn cell_file_name(proc: ProcTechnique, thread: TechniqueKind) -> String {
    format!("{proc}__{thread}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest of every setting that affects a cell's measurements.
pub fn config_digest(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.out = PathBuf::new();
    c.trace = TraceMode::None;
    c.allow_oversubscribe = false;
    c.proc_techniques.clear();
    c.thread_techniques.clear();
    let json = serde_json::to_string(&c).expect("config serializes");
    hex(&Sha256::digest(json.as_bytes()))
}

/// Digest of the chunk decisions of one or more consecutive runs.
pub fn chunk_log_digest(runs: &[RunResult]) -> String {
    let mut h = Sha256::new();
    for r in runs {
        h.update(b"step");
        for c in &r.proc_chunks {
            for v in [c.rank as u64, c.start, c.size] {
                h.update(v.to_le_bytes());
            }
        }
        let mut sub: Vec<(usize, u64, u64, u64)> = r
            .thread_chunks
            .iter()
            .map(|c| (c.rank, c.proc_start, c.start, c.size))
            .collect();
        sub.sort_unstable();
        h.update(b"threads");
        for (rank, ps, s, z) in sub {
            for v in [rank as u64, ps, s, z] {
                h.update(v.to_le_bytes());
            }
        }
    }
    hex(&h.finalize())
}

fn measurement(repetition: u32, runs: &[RunResult]) -> Measurement {
    let p = runs.first().map_or(0, |r| r.rank_finish.len());
    let mut finish = vec![0.0; p];
    for r in runs {
        for (f, x) in finish.iter_mut().zip(&r.rank_finish) {
            *f += x;
        }
    }
    let imbalance = ImbalanceReport::from_finish_times(&finish).ok();
    Measurement {
        repetition,
        wall_time_s: runs.iter().map(|r| r.wall_time).sum(),
        cov: imbalance.as_ref().map(|i| i.cov),
        mean_max: imbalance.as_ref().map(|i| i.mean_max),
        sched_events_proc: runs.iter().map(|r| r.proc_chunks.len() as u64).sum(),
        sched_events_thread: runs.iter().map(|r| r.thread_chunks.len() as u64).sum(),
        chunk_log_sha256: chunk_log_digest(runs),
    }
}

/// The runtime plan of one cell.
pub fn cell_plan(config: &ExperimentConfig, proc: ProcTechnique, thread: TechniqueKind) -> RunPlan {
    let mut plan = RunPlan::new(config.n, config.p, config.t, proc, thread);
    plan.proc_min_chunk = config.proc_min_chunk;
    plan.thread_min_chunk = config.thread_min_chunk;
    plan.timesteps = config.timesteps;
    plan.transport = config.transport;
    plan.seed = config.seed;
    plan.proc_fsc = config.fsc.map(|f| f.params());
    plan.thread_fsc = config.fsc.map(|f| f.params());
    plan.serialize_requests = config.serialize_requests;
    plan
}

/// Execute one cell: an untimed warm-up run, then the timed measurements.
/// Also returns the trace of the last measured run.
pub fn run_cell(
    config: &ExperimentConfig,
    workload: &Workload,
    proc: ProcTechnique,
    thread: TechniqueKind,
) -> Result<(Vec<Measurement>, Vec<TraceEvent>), RuntimeError> {
    let plan = cell_plan(config, proc, thread);
    let task = |i, ctx: &_| workload.execute(i, ctx);
    if config.warmup {
        setup(plan.clone())?.run_loop(&task)?;
    }
    let mut out = Vec::with_capacity(config.repetitions as usize);
    let mut last = Vec::new();
    match config.measure {
        Measure::Repetitions => {
            for rep in 0..config.repetitions {
                let runs = setup(plan.clone())?.run_timesteps(&task, config.timesteps)?;
                out.push(measurement(rep, &runs));
                last = runs;
            }
        }
        Measure::Timesteps => {
            let runs = setup(plan)?.run_timesteps(&task, config.repetitions as u64)?;
            for (k, r) in runs.iter().enumerate() {
                out.push(measurement(k as u32, std::slice::from_ref(r)));
            }
            last = runs;
        }
    }
    // each step's clock starts at zero; shift so the joined trace is monotone
    let mut offset = 0.0;
    let mut trace = Vec::new();
    for r in last {
        trace.extend(r.trace.into_iter().map(|mut e| {
            e.t += offset;
            e
        }));
        offset += r.wall_time;
    }
    Ok((out, trace))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SweepError + '_ {
    move |source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SweepError> {
    let tmp = path.with_extension("json.tmp");
    let text = serde_json::to_string_pretty(value).expect("result serializes");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SweepError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| SweepError::Corrupt {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub const AGGREGATE_FILE: &str = "sweep.json";
pub const CONFIG_FILE: &str = "config.json";
pub const CELLS_DIR: &str = "cells";
pub const TRACES_DIR: &str = "traces";

/// A completed cell on disk that was produced by the same settings.
fn reusable_cell(path: &Path, digest: &str) -> Option<CellResult> {
    let cell: CellResult = read_json(path).ok()?;
    (cell.config_digest == digest && cell.is_ok()).then_some(cell)
}

/// Run every cell of `config` not already completed in its output
/// directory, then write the aggregate.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult, SweepError> {
    config.check()?;
    let needed = config.p * config.t;
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    if needed > available && !config.allow_oversubscribe {
        return Err(SweepError::Oversubscribed { needed, available });
    }
    let workload = Workload::build(&config.kernel, config.n, config.p, config.seed)?;

    let out = &config.out;
    let cells_dir = out.join(CELLS_DIR);
    fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;
    write_json(&out.join(CONFIG_FILE), config)?;
    let digest = config_digest(config);

    let keys = cell_keys(config);
    let mut cells = Vec::with_capacity(keys.len());
    for (k, &(proc, thread)) in keys.iter().enumerate() {
        let name = cell_file_name(proc, thread);
        let path = cells_dir.join(format!("{name}.json"));
        if let Some(cell) = reusable_cell(&path, &digest) {
            log::info!("[{}/{}] {name}: reusing completed cell", k + 1, keys.len());
            cells.push(cell);
            continue;
        }
        log::info!("[{}/{}] {name}: running", k + 1, keys.len());
        let cell = match run_cell(config, &workload, proc, thread) {
            Ok((measurements, trace)) => {
                if config.trace == TraceMode::Last {
                    let dir = out.join(TRACES_DIR);
                    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                    let path = dir.join(format!("{name}.jsonl"));
                    if let Err(e) = export_trace(&trace, TraceFormat::JsonLines, &path) {
                        log::warn!("{name}: trace not written: {e}");
                    }
                }
                CellResult {
                    proc_technique: proc,
                    thread_technique: thread,
                    config_digest: digest.clone(),
                    measurements,
                    error: None,
                }
            }
            Err(e) => {
                log::error!("{name}: {e}");
                CellResult {
                    proc_technique: proc,
                    thread_technique: thread,
                    config_digest: digest.clone(),
                    measurements: Vec::new(),
                    error: Some(e.to_string()),
                }
            }
        };
        write_json(&path, &cell)?;
        cells.push(cell);
    }
    let result = SweepResult {
        config: config.clone(),
        config_digest: digest,
        oversubscribed: needed > available,
        cells,
    };
    write_json(&out.join(AGGREGATE_FILE), &result)?;
    Ok(result)
}

/// Load a sweep from its output directory, rebuilding the aggregate from the
/// per-cell files when it is missing. Cells not on disk are absent from the
/// result.
pub fn load_sweep(dir: &Path) -> Result<SweepResult, SweepError> {
    let aggregate = dir.join(AGGREGATE_FILE);
    if aggregate.exists() {
        return read_json(&aggregate);
    }
    let config: ExperimentConfig = read_json(&dir.join(CONFIG_FILE))?;
    let digest = config_digest(&config);
    let mut cells = Vec::new();
    for (proc, thread) in cell_keys(&config) {
        let path = dir.join(CELLS_DIR).join(format!("{}.json", cell_file_name(proc, thread)));
        if path.exists() {
            let cell: CellResult = read_json(&path)?;
            if cell.config_digest == digest {
                cells.push(cell);
            }
        }
    }
    let needed = config.p * config.t;
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(SweepResult {
        config,
        config_digest: digest,
        oversubscribed: needed > available,
        cells,
    })
}
