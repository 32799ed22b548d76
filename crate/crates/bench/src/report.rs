//! Tables behind the improvement heatmaps and the per-level comparison.
//!
//! Improvements are `100 * (baseline - cell) / baseline` over mean wall
//! times: positive is faster than NODLB/STATIC, negative is slower.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::stats::Stats;
use crate::sweep::{Pick, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}` (csv, markdown)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub const RAW_FILE: &str = "raw.csv";
pub const IMPROVEMENT_FILE: &str = "improvement.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const LEVELS_FILE: &str = "levels.csv";
pub const STATS_FILE: &str = "cell_stats.csv";
pub const MARKDOWN_FILE: &str = "report.md";

pub const RAW_HEADER: [&str; 8] = [
    "proc_technique",
    "thread_technique",
    "repetition",
    "wall_time_s",
    "cov",
    "mean_max",
    "sched_events_proc",
    "sched_events_thread",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_file(path: &Path) -> Result<csv::Writer<fs::File>, ReportError> {
    csv::Writer::from_path(path).map_err(|source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut w = csv_file(path)?;
    let err = |source| ReportError::Csv {
        path: path.to_path_buf(),
        source,
    };
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.flush().map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Every measurement, one row per repetition.
pub fn raw_rows(result: &SweepResult) -> Vec<Vec<String>> {
    let mut rows = vec![RAW_HEADER.iter().map(|s| s.to_string()).collect()];
    for c in result.cells.iter().filter(|c| c.is_ok()) {
        for m in &c.measurements {
            rows.push(vec![
                c.proc_technique.to_string(),
                c.thread_technique.to_string(),
                m.repetition.to_string(),
                m.wall_time_s.to_string(),
                opt(m.cov),
                opt(m.mean_max),
                m.sched_events_proc.to_string(),
                m.sched_events_thread.to_string(),
            ]);
        }
    }
    rows
}

fn improvement_rows(result: &SweepResult) -> Vec<Vec<String>> {
    let mut header = vec!["proc_technique".to_string()];
    header.extend(result.columns().iter().map(|t| t.to_string()));
    let mut rows = vec![header];
    for (p, values) in result.improvement_matrix() {
        let mut row = vec![p.to_string()];
        row.extend(values.into_iter().map(opt));
        rows.push(row);
    }
    rows
}

fn pick_row(role: &str, p: &Option<Pick>) -> Vec<String> {
    match p {
        Some(p) => {
            let s = p.stats;
            vec![
                role.to_string(),
                p.proc_technique.to_string(),
                p.thread_technique.to_string(),
                s.mean.to_string(),
                s.median.to_string(),
                s.min.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
                s.max.to_string(),
                opt(p.improvement_pct),
            ]
        }
        None => {
            let mut row = vec![role.to_string()];
            row.resize(10, String::new());
            row
        }
    }
}

const PICK_HEADER: [&str; 10] = [
    "role",
    "proc_technique",
    "thread_technique",
    "mean_s",
    "median_s",
    "min_s",
    "q1_s",
    "q3_s",
    "max_s",
    "improvement_pct",
];

fn summary_rows(result: &SweepResult) -> Vec<Vec<String>> {
    let levels = result.level_comparison();
    let strict = result.strict_comparison();
    vec![
        PICK_HEADER.iter().map(|s| s.to_string()).collect(),
        pick_row("winner", &result.winner()),
        pick_row("baseline", &levels.baseline),
        pick_row("best_thread_only", &strict.thread_only),
        pick_row("best_proc_only", &strict.proc_only),
        pick_row("best_both_levels", &strict.both),
    ]
}

fn level_rows(result: &SweepResult) -> Vec<Vec<String>> {
    let l = result.level_comparison();
    vec![
        PICK_HEADER.iter().map(|s| s.to_string()).collect(),
        pick_row("baseline", &l.baseline),
        pick_row("thread_level", &l.thread_level),
        pick_row("proc_level", &l.proc_level),
        pick_row("two_level", &l.two_level),
    ]
}

fn stats_rows(result: &SweepResult) -> Vec<Vec<String>> {
    let mut rows = vec![[
        "proc_technique",
        "thread_technique",
        "count",
        "mean_s",
        "min_s",
        "q1_s",
        "median_s",
        "q3_s",
        "max_s",
        "error",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()];
    for c in &result.cells {
        let s = c.stats();
        let f = |g: fn(&Stats) -> f64| s.as_ref().map(g).map(|x| x.to_string()).unwrap_or_default();
        rows.push(vec![
            c.proc_technique.to_string(),
            c.thread_technique.to_string(),
            s.map_or(0, |s| s.count).to_string(),
            f(|s| s.mean),
            f(|s| s.min),
            f(|s| s.q1),
            f(|s| s.median),
            f(|s| s.q3),
            f(|s| s.max),
            c.error.clone().unwrap_or_default(),
        ]);
    }
    rows
}

fn markdown_table(rows: &[Vec<String>]) -> String {
    let mut s = String::new();
    let Some((head, body)) = rows.split_first() else {
        return s;
    };
    let _ = writeln!(s, "| {} |", head.join(" | "));
    let _ = writeln!(s, "|{}|", vec!["---"; head.len()].join("|"));
    for r in body {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|x| format!("{x:+.1}")).unwrap_or_else(|| "n/a".into())
}

fn describe(p: &Option<Pick>) -> String {
    match p {
        Some(p) => format!(
            "{} / {}: mean {:.6} s ({}%)",
            p.proc_technique,
            p.thread_technique,
            p.stats.mean,
            fmt_pct(p.improvement_pct)
        ),
        None => "n/a".into(),
    }
}

fn markdown(result: &SweepResult) -> String {
    let c = &result.config;
    let mut s = String::new();
    let _ = writeln!(s, "# Sweep report\n");
    let _ = writeln!(
        s,
        "Kernel `{}`, N = {}, P = {}, T = {}, {} {} per cell ({}).",
        c.kernel.name(),
        c.n,
        c.p,
        c.t,
        c.repetitions,
        match c.measure {
            crate::config::Measure::Repetitions => "repetitions",
            crate::config::Measure::Timesteps => "consecutive time-steps",
        },
        if c.measure == crate::config::Measure::Repetitions && c.timesteps > 1 {
            format!("{} time-steps each", c.timesteps)
        } else {
            "one loop each".to_string()
        }
    );
    if result.oversubscribed {
        let _ = writeln!(s, "\nP x T exceeded the logical cores: threads time-shared the CPU.");
    }
    let failed = result.failed_cells();
    if !failed.is_empty() {
        let _ = writeln!(s, "\n{} cell(s) failed and are left out.", failed.len());
    }
    let _ = writeln!(s, "\n## Best combination\n");
    let _ = writeln!(s, "Winner: {}\n", describe(&result.winner()));
    let strict = result.strict_comparison();
    let _ = writeln!(s, "- dynamic at the thread level only: {}", describe(&strict.thread_only));
    let _ = writeln!(s, "- dynamic at the process level only: {}", describe(&strict.proc_only));
    let _ = writeln!(s, "- dynamic at both levels: {}", describe(&strict.both));
    let _ = writeln!(s, "\n## Per-level comparison\n");
    let _ = write!(s, "{}", markdown_table(&level_rows(result)));
    let _ = writeln!(s, "\n## Improvement over NODLB/STATIC (%)\n");
    let mut rows = improvement_rows(result);
    for r in rows.iter_mut().skip(1) {
        for v in r.iter_mut().skip(1) {
            *v = fmt_pct(v.parse().ok());
        }
    }
    let _ = write!(s, "{}", markdown_table(&rows));
    let _ = writeln!(s, "\n## Cell statistics (seconds)\n");
    let _ = write!(s, "{}", markdown_table(&stats_rows(result)));
    s
}

/// Write the report files into `dir` and return their paths. The raw
/// measurements are always CSV.
pub fn write_report(result: &SweepResult, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, ReportError> {
    fs::create_dir_all(dir).map_err(|source| ReportError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let raw = dir.join(RAW_FILE);
    write_rows(&raw, &raw_rows(result))?;
    written.push(raw);
    match format {
        ReportFormat::Csv => {
            for (name, rows) in [
                (IMPROVEMENT_FILE, improvement_rows(result)),
                (SUMMARY_FILE, summary_rows(result)),
                (LEVELS_FILE, level_rows(result)),
                (STATS_FILE, stats_rows(result)),
            ] {
                let path = dir.join(name);
                write_rows(&path, &rows)?;
                written.push(path);
            }
        }
        ReportFormat::Markdown => {
            let path = dir.join(MARKDOWN_FILE);
            fs::write(&path, markdown(result)).map_err(|source| ReportError::Io {
                path: path.clone(),
                source,
            })?;
            written.push(path);
        }
    }
    Ok(written)
}
