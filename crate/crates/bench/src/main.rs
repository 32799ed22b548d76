use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dls_bench::sweep::SweepError;
use dls_bench::{load_sweep, run_sweep, validate_config_with, write_report, Flags, ReportFormat};
use dls_core::trace::{import_trace, write_trace, TraceFormat};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dls-bench", version, about = "Two-level loop self-scheduling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the factorial sweep described by a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the configuration's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Serve work requests in cyclic rank order for reproducible chunk logs.
        #[arg(long)]
        serialize_requests: bool,
        /// Allow P x T to exceed the logical cores.
        #[arg(long)]
        allow_oversubscribe: bool,
        /// Permit FSC, and SS or WF at the process level.
        #[arg(long)]
        override_excluded: bool,
        /// Format of the report written after the sweep.
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
    /// Write the report tables of a finished or partial sweep.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
        /// Directory for the tables; defaults to the sweep directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a recorded trace to JSON lines or CSV.
    Trace {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_trace_format)]
        format: TraceFormat,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_trace_format(s: &str) -> Result<TraceFormat, String> {
    s.parse()
}

fn input_trace_format(path: &Path) -> TraceFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => TraceFormat::Csv,
        _ => TraceFormat::JsonLines,
    }
}

fn run(config: &Path, flags: Flags, format: ReportFormat) -> u8 {
    let validated = match validate_config_with(config, &flags) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    for w in &validated.warnings {
        log::warn!("{w}");
    }
    let result = match run_sweep(&validated.config) {
        Ok(r) => r,
        Err(e @ (SweepError::Config(_) | SweepError::Oversubscribed { .. } | SweepError::Kernel(_))) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = write_report(&result, &validated.config.out, format) {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    let failed = result.failed_cells().len();
    if let Some(w) = result.winner() {
        println!(
            "best: {} / {} mean {:.6} s, {:+.1}% vs NODLB/STATIC",
            w.proc_technique,
            w.thread_technique,
            w.stats.mean,
            w.improvement_pct.unwrap_or(f64::NAN)
        );
    }
    println!("results in {}", validated.config.out.display());
    if failed == 0 {
        0
    } else if failed == result.cells.len() {
        eprintln!("error: every cell failed");
        EXIT_RUNTIME
    } else {
        eprintln!("warning: {failed} of {} cells failed", result.cells.len());
        EXIT_PARTIAL
    }
}

fn report(input: &Path, format: ReportFormat, out: Option<PathBuf>) -> u8 {
    let result = match load_sweep(input) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    match write_report(&result, out.as_deref().unwrap_or(input), format) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            if result.is_complete() {
                0
            } else {
                EXIT_PARTIAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn trace(input: &Path, format: TraceFormat, out: Option<PathBuf>) -> u8 {
    let events = match import_trace(input, input_trace_format(input)) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let written = match &out {
        Some(path) => File::create(path).and_then(|f| write_trace(&events, format, f)),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_trace(&events, format, &mut lock).and_then(|_| lock.flush())
        }
    };
    match written {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", out.as_deref().unwrap_or(Path::new("<stdout>")).display());
            EXIT_RUNTIME
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match cli.command {
        Command::Run {
            config,
            out,
            serialize_requests,
            allow_oversubscribe,
            override_excluded,
            format,
        } => run(
            &config,
            Flags {
                out,
                serialize_requests,
                allow_oversubscribe,
                override_excluded,
            },
            format,
        ),
        Command::Report { input, format, out } => report(&input, format, out),
        Command::Trace { input, format, out } => trace(&input, format, out),
    };
    ExitCode::from(code)
}
