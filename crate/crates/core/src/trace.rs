//! Execution traces and their decomposition into idle time.
//!
//! Events are grouped into streams keyed by `(level, rank, thread)`. Within a
//! stream, times are non-decreasing and `*_start`/`*_end` pairs nest
//! properly. Finishing time of a PE is the time of its last `chunk_end`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Process,
    Thread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ChunkStart,
    ChunkEnd,
    WaitStart,
    WaitEnd,
    TimestepStart,
    TimestepEnd,
}

impl EventKind {
    fn opens(self) -> Option<Self> {
        match self {
            EventKind::ChunkStart => Some(EventKind::ChunkEnd),
            EventKind::WaitStart => Some(EventKind::WaitEnd),
            EventKind::TimestepStart => Some(EventKind::TimestepEnd),
            _ => None,
        }
    }

    fn is_end(self) -> bool {
        matches!(
            self,
            EventKind::ChunkEnd | EventKind::WaitEnd | EventKind::TimestepEnd
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub level: Level,
    pub rank: u32,
    pub thread: Option<u32>,
    pub kind: EventKind,
    /// Seconds since the start of the run.
    pub t: f64,
    /// `(start, size)` of the chunk, for chunk events.
    pub chunk: Option<(u64, u64)>,
}

impl TraceEvent {
    pub fn process(rank: u32, kind: EventKind, t: f64, chunk: Option<(u64, u64)>) -> Self {
        TraceEvent {
            level: Level::Process,
            rank,
            thread: None,
            kind,
            t,
            chunk,
        }
    }

    pub fn thread(rank: u32, thread: u32, kind: EventKind, t: f64, chunk: Option<(u64, u64)>) -> Self {
        TraceEvent {
            level: Level::Thread,
            rank,
            thread: Some(thread),
            kind,
            t,
            chunk,
        }
    }

    fn stream(&self) -> (Level, u32, Option<u32>) {
        (self.level, self.rank, self.thread)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("malformed trace at event {index}: {reason}")]
    Malformed { index: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Check per-stream time ordering and start/end nesting.
pub fn validate(trace: &[TraceEvent]) -> Result<(), TraceError> {
    let mut streams: BTreeMap<(Level, u32, Option<u32>), (f64, Vec<EventKind>)> = BTreeMap::new();
    for (index, ev) in trace.iter().enumerate() {
        let bad = |reason: String| TraceError::Malformed { index, reason };
        if !ev.t.is_finite() || ev.t < 0.0 {
            return Err(bad(format!("invalid time {}", ev.t)));
        }
        if (ev.level == Level::Thread) != ev.thread.is_some() {
            return Err(bad("thread id must be set exactly for thread-level events".into()));
        }
        let (last_t, stack) = streams
            .entry(ev.stream())
            .or_insert((f64::NEG_INFINITY, Vec::new()));
        if ev.t < *last_t {
            return Err(bad(format!("time {} before previous {}", ev.t, last_t)));
        }
        *last_t = ev.t;
        if let Some(end) = ev.kind.opens() {
            stack.push(end);
        } else if ev.kind.is_end() {
            match stack.pop() {
                Some(expected) if expected == ev.kind => {}
                Some(expected) => {
                    return Err(bad(format!("{:?} closes an open {:?}", ev.kind, expected)))
                }
                None => return Err(bad(format!("{:?} without matching start", ev.kind))),
            }
        }
    }
    for ((level, rank, thread), (_, stack)) in &streams {
        if let Some(open) = stack.last() {
            return Err(TraceError::Malformed {
                index: trace.len(),
                reason: format!("{level:?} rank {rank} thread {thread:?} left {open:?} pending"),
            });
        }
    }
    Ok(())
}

/// Idle time at both levels, derived from finishing times.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitDecomposition {
    /// `rank_finish[r]`: last process-level `chunk_end` of rank `r` (or its
    /// latest thread finish when it has no process-level events).
    pub rank_finish: Vec<f64>,
    /// `thread_finish[r][t]`: last thread-level `chunk_end` of thread `t`.
    pub thread_finish: Vec<Vec<f64>>,
    /// Latest thread finish of the rank minus each thread's finish.
    pub thread_idle: Vec<Vec<f64>>,
    /// Latest rank finish minus each rank's finish.
    pub rank_idle: Vec<f64>,
    pub total_thread_idle: f64,
    pub total_rank_idle: f64,
}

pub fn wait_decomposition(trace: &[TraceEvent]) -> Result<WaitDecomposition, TraceError> {
    validate(trace)?;
    let ranks = trace.iter().map(|e| e.rank as usize + 1).max().unwrap_or(0);
    let mut threads = vec![0usize; ranks];
    for e in trace {
        if let Some(t) = e.thread {
            threads[e.rank as usize] = threads[e.rank as usize].max(t as usize + 1);
        }
    }
    let mut thread_finish: Vec<Vec<f64>> = threads.iter().map(|&n| vec![0.0; n]).collect();
    let mut proc_finish: Vec<Option<f64>> = vec![None; ranks];
    for e in trace.iter().filter(|e| e.kind == EventKind::ChunkEnd) {
        let r = e.rank as usize;
        match e.thread {
            Some(t) => {
                let slot = &mut thread_finish[r][t as usize];
                *slot = slot.max(e.t);
            }
            None => proc_finish[r] = Some(proc_finish[r].unwrap_or(0.0).max(e.t)),
        }
    }
    let rank_finish: Vec<f64> = proc_finish
        .iter()
        .zip(&thread_finish)
        .map(|(p, ts)| p.unwrap_or_else(|| ts.iter().copied().fold(0.0, f64::max)))
        .collect();

    let thread_idle: Vec<Vec<f64>> = thread_finish
        .iter()
        .map(|ts| {
            let last = ts.iter().copied().fold(0.0, f64::max);
            ts.iter().map(|t| last - t).collect()
        })
        .collect();
    let global = rank_finish.iter().copied().fold(0.0, f64::max);
    let rank_idle: Vec<f64> = rank_finish.iter().map(|t| global - t).collect();

    Ok(WaitDecomposition {
        total_thread_idle: thread_idle.iter().flatten().sum(),
        total_rank_idle: rank_idle.iter().sum(),
        rank_finish,
        thread_finish,
        thread_idle,
        rank_idle,
    })
}

/// Sum of recorded `wait_start`..`wait_end` intervals per `(level, rank, thread)`.
pub fn recorded_waits(trace: &[TraceEvent]) -> BTreeMap<(Level, u32, Option<u32>), f64> {
    let mut open: BTreeMap<(Level, u32, Option<u32>), f64> = BTreeMap::new();
    let mut total = BTreeMap::new();
    for e in trace {
        match e.kind {
            EventKind::WaitStart => {
                open.insert(e.stream(), e.t);
            }
            EventKind::WaitEnd => {
                if let Some(s) = open.remove(&e.stream()) {
                    *total.entry(e.stream()).or_insert(0.0) += e.t - s;
                }
            }
            _ => {}
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    JsonLines,
    Csv,
}

impl FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json-lines" | "jsonl" => Ok(TraceFormat::JsonLines),
            "csv" => Ok(TraceFormat::Csv),
            other => Err(format!("unknown trace format `{other}` (json-lines, csv)")),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::JsonLines => "json-lines",
            TraceFormat::Csv => "csv",
        })
    }
}

/// Flat on-disk record; field order is the CSV column order.
#[derive(Debug, Serialize, Deserialize)]
struct Record {
    v: u32,
    level: Level,
    rank: u32,
    thread: Option<u32>,
    kind: EventKind,
    t: f64,
    start: Option<u64>,
    size: Option<u64>,
}

impl From<&TraceEvent> for Record {
    fn from(e: &TraceEvent) -> Self {
        Record {
            v: SCHEMA_VERSION,
            level: e.level,
            rank: e.rank,
            thread: e.thread,
            kind: e.kind,
            t: e.t,
            start: e.chunk.map(|c| c.0),
            size: e.chunk.map(|c| c.1),
        }
    }
}

impl Record {
    fn into_event(self) -> Result<TraceEvent, String> {
        if self.v != SCHEMA_VERSION {
            return Err(format!("unsupported schema version {}", self.v));
        }
        let chunk = match (self.start, self.size) {
            (Some(s), Some(n)) => Some((s, n)),
            (None, None) => None,
            _ => return Err("start and size must both be present or both null".into()),
        };
        Ok(TraceEvent {
            level: self.level,
            rank: self.rank,
            thread: self.thread,
            kind: self.kind,
            t: self.t,
            chunk,
        })
    }
}

const CSV_HEADER: [&str; 8] = ["v", "level", "rank", "thread", "kind", "t", "start", "size"];

pub fn write_trace<W: Write>(trace: &[TraceEvent], format: TraceFormat, out: W) -> io::Result<()> {
    match format {
        TraceFormat::JsonLines => {
            let mut out = BufWriter::new(out);
            for e in trace {
                serde_json::to_writer(&mut out, &Record::from(e))?;
                out.write_all(b"\n")?;
            }
            out.flush()
        }
        TraceFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER).map_err(io::Error::other)?;
            for e in trace {
                w.serialize(Record::from(e)).map_err(io::Error::other)?;
            }
            w.flush()
        }
    }
}

pub fn read_trace<R: Read>(input: R, format: TraceFormat) -> Result<Vec<TraceEvent>, TraceError> {
    let mut events = Vec::new();
    match format {
        TraceFormat::JsonLines => {
            for (i, line) in BufReader::new(input).lines().enumerate() {
                let line = line.map_err(|e| TraceError::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let parse = |msg: String| TraceError::Parse { line: i + 1, msg };
                let rec: Record = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
                events.push(rec.into_event().map_err(parse)?);
            }
        }
        TraceFormat::Csv => {
            let mut r = csv::Reader::from_reader(input);
            for (i, rec) in r.deserialize::<Record>().enumerate() {
                let parse = |msg: String| TraceError::Parse { line: i + 2, msg };
                let rec = rec.map_err(|e| parse(e.to_string()))?;
                events.push(rec.into_event().map_err(parse)?);
            }
        }
    }
    Ok(events)
}

pub fn export_trace(trace: &[TraceEvent], format: TraceFormat, path: &Path) -> Result<(), TraceError> {
    let io_err = |source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    write_trace(trace, format, file).map_err(io_err)
}

pub fn import_trace(path: &Path, format: TraceFormat) -> Result<Vec<TraceEvent>, TraceError> {
    let file = File::open(path).map_err(|source| TraceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_trace(file, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventKind::*;

    fn chunk(rank: u32, thread: u32, t0: f64, t1: f64) -> [TraceEvent; 2] {
        [
            TraceEvent::thread(rank, thread, ChunkStart, t0, Some((0, 1))),
            TraceEvent::thread(rank, thread, ChunkEnd, t1, Some((0, 1))),
        ]
    }

    #[test]
    fn simultaneous_threads_have_no_idle() {
        let mut tr = Vec::new();
        tr.extend(chunk(0, 0, 0.0, 2.0));
        tr.extend(chunk(0, 1, 0.0, 2.0));
        let w = wait_decomposition(&tr).unwrap();
        assert_eq!(w.thread_idle, vec![vec![0.0, 0.0]]);
        assert_eq!(w.total_thread_idle, 0.0);
    }

    #[test]
    fn rank_idle_against_global_max() {
        let tr = vec![
            TraceEvent::process(0, ChunkStart, 0.0, Some((0, 5))),
            TraceEvent::process(0, ChunkEnd, 3.0, Some((0, 5))),
            TraceEvent::process(1, ChunkStart, 0.0, Some((5, 5))),
            TraceEvent::process(1, ChunkEnd, 4.0, Some((5, 5))),
        ];
        let w = wait_decomposition(&tr).unwrap();
        assert_eq!(w.rank_idle, vec![1.0, 0.0]);
        assert_eq!(w.rank_finish, vec![3.0, 4.0]);
    }

    #[test]
    fn rank_finish_falls_back_to_threads() {
        let mut tr = Vec::new();
        tr.extend(chunk(0, 0, 0.0, 1.0));
        tr.extend(chunk(0, 1, 0.0, 1.5));
        let w = wait_decomposition(&tr).unwrap();
        assert_eq!(w.rank_finish, vec![1.5]);
        assert_eq!(w.thread_idle[0], vec![0.5, 0.0]);
    }

    #[test]
    fn malformed_traces_name_the_event() {
        let tr = vec![
            TraceEvent::thread(0, 0, ChunkStart, 1.0, None),
            TraceEvent::thread(0, 0, ChunkStart, 0.5, None),
        ];
        match validate(&tr) {
            Err(TraceError::Malformed { index, .. }) => assert_eq!(index, 1),
            other => panic!("{other:?}"),
        }
        let tr = vec![TraceEvent::thread(0, 0, WaitEnd, 1.0, None)];
        assert!(matches!(validate(&tr), Err(TraceError::Malformed { index: 0, .. })));
        let tr = vec![
            TraceEvent::thread(0, 0, WaitStart, 1.0, None),
            TraceEvent::thread(0, 0, ChunkEnd, 2.0, None),
        ];
        assert!(matches!(validate(&tr), Err(TraceError::Malformed { index: 1, .. })));
        let tr = vec![TraceEvent::process(0, ChunkStart, 1.0, None)];
        assert!(matches!(validate(&tr), Err(TraceError::Malformed { index: 1, .. })));
        let bad_level = TraceEvent {
            thread: None,
            ..TraceEvent::thread(0, 0, ChunkStart, 0.0, None)
        };
        assert!(validate(&[bad_level]).is_err());
    }

    #[test]
    fn recorded_wait_totals() {
        let tr = vec![
            TraceEvent::process(1, WaitStart, 1.0, None),
            TraceEvent::process(1, WaitEnd, 1.25, None),
            TraceEvent::process(1, WaitStart, 2.0, None),
            TraceEvent::process(1, WaitEnd, 2.5, None),
        ];
        let w = recorded_waits(&tr);
        assert_eq!(w[&(Level::Process, 1, None)], 0.75);
    }

    #[test]
    fn empty_trace_exports_header_only() {
        let mut buf = Vec::new();
        write_trace(&[], TraceFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "v,level,rank,thread,kind,t,start,size\n");
        let mut buf = Vec::new();
        write_trace(&[], TraceFormat::JsonLines, &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn json_schema() {
        let mut buf = Vec::new();
        let ev = TraceEvent::thread(2, 1, ChunkEnd, 0.5, Some((10, 4)));
        write_trace(&[ev], TraceFormat::JsonLines, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"v\":1,\"level\":\"thread\",\"rank\":2,\"thread\":1,\"kind\":\"chunk_end\",\"t\":0.5,\"start\":10,\"size\":4}\n"
        );
        let mut buf = Vec::new();
        let ev = TraceEvent::process(0, TimestepStart, 0.0, None);
        write_trace(&[ev], TraceFormat::JsonLines, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"v\":1,\"level\":\"process\",\"rank\":0,\"thread\":null,\"kind\":\"timestep_start\",\"t\":0.0,\"start\":null,\"size\":null}\n"
        );
    }

    #[test]
    fn rejects_other_schema_versions() {
        let line = "{\"v\":2,\"level\":\"process\",\"rank\":0,\"thread\":null,\"kind\":\"chunk_end\",\"t\":0.0,\"start\":null,\"size\":null}\n";
        assert!(matches!(
            read_trace(line.as_bytes(), TraceFormat::JsonLines),
            Err(TraceError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn io_errors_carry_path() {
        let err = import_trace(Path::new("/nonexistent/trace.csv"), TraceFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/trace.csv"));
    }
}
