//! Experiment configuration, read from a single JSON document.
//!
//! ```json
//! {
//!   "kernel": { "kind": "mandelbrot", "width": 256, "height": 256, "max_iter": 10000 },
//!   "p": 4, "t": 2,
//!   "proc_techniques": ["NODLB", "GSS", "FAC"],
//!   "thread_techniques": ["STATIC", "SS"],
//!   "repetitions": 5
//! }
//! ```
//!
//! Every field but `kernel` has a default. Validation collects every problem
//! before failing.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use dls_core::kernels::{load_oriented_points, CostDistribution};
use dls_core::{FscParams, ProcTechnique, TechniqueKind};
use dls_runtime::Transport;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::workload::Workload;

pub const DEFAULT_THREAD_TECHNIQUES: [TechniqueKind; 6] = [
    TechniqueKind::Static,
    TechniqueKind::Ss,
    TechniqueKind::Gss,
    TechniqueKind::Tss,
    TechniqueKind::Fac,
    TechniqueKind::Rand,
];

pub const DEFAULT_PROC_TECHNIQUES: [ProcTechnique; 11] = [
    ProcTechnique::Nodlb,
    ProcTechnique::Dls(TechniqueKind::Mfsc),
    ProcTechnique::Dls(TechniqueKind::Gss),
    ProcTechnique::Dls(TechniqueKind::Tss),
    ProcTechnique::Dls(TechniqueKind::Fac),
    ProcTechnique::Dls(TechniqueKind::Awf),
    ProcTechnique::Dls(TechniqueKind::AwfB),
    ProcTechnique::Dls(TechniqueKind::AwfC),
    ProcTechnique::Dls(TechniqueKind::AwfD),
    ProcTechnique::Dls(TechniqueKind::AwfE),
    ProcTechnique::Dls(TechniqueKind::Af),
];

pub const DEFAULT_REPETITIONS: u32 = 20;
pub const DEFAULT_P: usize = 4;
pub const DEFAULT_T: usize = 2;
pub const DEFAULT_SYNTHETIC_N: u64 = 10_000;
pub const DEFAULT_SPIN_IMAGE_POINTS: u64 = 2_000;

const SS_RATIONALE: &str =
    "it assigns a single task to a requesting process, which wastes the thread-level parallelism as only one thread is used";
const WF_RATIONALE: &str = "it is designed for heterogeneous systems; use the AWF family to learn weights instead";
const FSC_RATIONALE: &str =
    "it needs profiled estimates of the scheduling overhead h and the task-time deviation sigma";

/// What one measurement is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// A fresh runtime per repetition, each running `timesteps` steps.
    Repetitions,
    /// One runtime running `repetitions` consecutive time-steps.
    Timesteps,
}

/// Which traces to keep on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    None,
    /// The last measured run of each cell.
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MandelbrotConfig {
    #[serde(default = "d_256")]
    pub width: u32,
    #[serde(default = "d_256")]
    pub height: u32,
    #[serde(default = "d_max_iter")]
    pub max_iter: u32,
    #[serde(default = "d_center")]
    pub center: [f64; 2],
    #[serde(default = "d_span")]
    pub span: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinImageConfig {
    /// Point file (`x y z nx ny nz` per line); a generated cloud of `n`
    /// points when absent.
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default = "d_image_width")]
    pub image_width: usize,
    #[serde(default = "d_one")]
    pub bin_size: f64,
    #[serde(default = "d_support_angle")]
    pub support_angle: f64,
    #[serde(default = "d_clusters")]
    pub clusters: usize,
    #[serde(default = "d_extent")]
    pub extent: f64,
    #[serde(default = "d_spread")]
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    #[serde(default = "d_distribution")]
    pub distribution: CostDistribution,
    #[serde(default = "d_base_cost")]
    pub base_cost_us: f64,
    /// Per-rank factor on every task cost, emulating slower PEs; empty
    /// means all ones, otherwise one entry per rank.
    #[serde(default)]
    pub rank_cost_multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimestepConfig {
    #[serde(default = "d_distribution")]
    pub distribution: CostDistribution,
    #[serde(default = "d_base_cost")]
    pub base_cost_us: f64,
    #[serde(default)]
    pub rank_cost_multipliers: Vec<f64>,
    #[serde(default)]
    pub drift: f64,
    #[serde(default)]
    pub intensity_amplitude: f64,
    #[serde(default = "d_period")]
    pub intensity_period: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelConfig {
    Mandelbrot(MandelbrotConfig),
    Spinimage(SpinImageConfig),
    Synthetic(SyntheticConfig),
    Timestep(TimestepConfig),
}

impl KernelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            KernelConfig::Mandelbrot(_) => "mandelbrot",
            KernelConfig::Spinimage(_) => "spinimage",
            KernelConfig::Synthetic(_) => "synthetic",
            KernelConfig::Timestep(_) => "timestep",
        }
    }

    fn rank_cost_multipliers(&self) -> &[f64] {
        match self {
            KernelConfig::Synthetic(s) => &s.rank_cost_multipliers,
            KernelConfig::Timestep(s) => &s.rank_cost_multipliers,
            _ => &[],
        }
    }
}

fn d_256() -> u32 {
    256
}
fn d_max_iter() -> u32 {
    10_000
}
fn d_center() -> [f64; 2] {
    [-1.05, 0.2]
}
fn d_span() -> f64 {
    0.05
}
fn d_image_width() -> usize {
    10
}
fn d_one() -> f64 {
    1.0
}
fn d_support_angle() -> f64 {
    1.2
}
fn d_clusters() -> usize {
    4
}
fn d_extent() -> f64 {
    10.0
}
fn d_spread() -> f64 {
    1.5
}
fn d_distribution() -> CostDistribution {
    CostDistribution::Constant
}
fn d_base_cost() -> f64 {
    100.0
}
fn d_period() -> u32 {
    20
}

/// A validated configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: KernelConfig,
    pub n: u64,
    pub p: usize,
    pub t: usize,
    pub thread_techniques: Vec<TechniqueKind>,
    pub proc_techniques: Vec<ProcTechnique>,
    pub repetitions: u32,
    pub timesteps: u64,
    pub measure: Measure,
    pub seed: u64,
    pub out: PathBuf,
    pub trace: TraceMode,
    #[serde(with = "transport_name")]
    pub transport: Transport,
    /// `None` selects half the mFSC chunk.
    pub proc_min_chunk: Option<u64>,
    pub thread_min_chunk: u64,
    /// FSC overhead and deviation, needed only when FSC is selected.
    pub fsc: Option<FscConfig>,
    pub warmup: bool,
    pub serialize_requests: bool,
    pub allow_oversubscribe: bool,
    pub override_excluded: bool,
}

impl ExperimentConfig {
    /// A configuration with every default and the given kernel.
    pub fn with_kernel(kernel: KernelConfig) -> Result<Self, ConfigError> {
        let mut map = Map::new();
        map.insert("kernel".into(), serde_json::to_value(kernel).expect("kernel serializes"));
        parse_value(Value::Object(map), Path::new("."), &Flags::default()).map(|v| v.config)
    }

    /// Check cross-field rules after programmatic edits.
    pub fn check(&self) -> Result<(), ConfigError> {
        let v = serde_json::to_value(self).expect("config serializes");
        let flags = Flags {
            out: None,
            serialize_requests: self.serialize_requests,
            allow_oversubscribe: self.allow_oversubscribe,
            override_excluded: self.override_excluded,
        };
        parse_value(v, Path::new("."), &flags).map(|_| ())
    }

    /// How many measurements each cell produces.
    pub fn measurements(&self) -> u32 {
        self.repetitions
    }
}

/// Command-line switches that take part in validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Flags {
    pub out: Option<PathBuf>,
    pub serialize_requests: bool,
    pub allow_oversubscribe: bool,
    pub override_excluded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub source_name: String,
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} problem(s)", self.source_name, self.problems.len())?;
        for p in &self.problems {
            write!(f, "\n  - {p}")?;
        }
        Ok(())
    }
}

const KNOWN_FIELDS: [&str; 20] = [
    "kernel",
    "n",
    "p",
    "t",
    "thread_techniques",
    "proc_techniques",
    "repetitions",
    "timesteps",
    "measure",
    "seed",
    "out",
    "trace",
    "transport",
    "proc_min_chunk",
    "thread_min_chunk",
    "fsc",
    "warmup",
    "serialize_requests",
    "allow_oversubscribe",
    "override_excluded",
];

/// Read, default and check the configuration at `path`.
pub fn validate_config(path: &Path) -> Result<Validated, ConfigError> {
    validate_config_with(path, &Flags::default())
}

pub fn validate_config_with(path: &Path, flags: &Flags) -> Result<Validated, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        source_name: path.display().to_string(),
        problems: vec![format!("cannot read: {e}")],
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config(&text, base, flags).map_err(|mut e| {
        e.source_name = path.display().to_string();
        e
    })
}

/// Parse configuration text; relative paths resolve against `base_dir`. An
/// empty document is an empty object.
pub fn parse_config(text: &str, base_dir: &Path, flags: &Flags) -> Result<Validated, ConfigError> {
    let value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| ConfigError {
            source_name: "<config>".into(),
            problems: vec![format!("invalid JSON: {e}")],
        })?
    };
    parse_value(value, base_dir, flags)
}

struct Fields {
    map: Map<String, Value>,
    problems: Vec<String>,
}

impl Fields {
    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        let v = self.map.remove(key)?;
        if v.is_null() {
            return None;
        }
        match serde_json::from_value(v) {
            Ok(x) => Some(x),
            Err(e) => {
                self.problems.push(format!("`{key}`: {e}"));
                None
            }
        }
    }

    fn bad(&mut self, msg: String) {
        self.problems.push(msg);
    }
}

fn parse_value(value: Value, base_dir: &Path, flags: &Flags) -> Result<Validated, ConfigError> {
    let fail = |problems| ConfigError {
        source_name: "<config>".into(),
        problems,
    };
    let Value::Object(map) = value else {
        return Err(fail(vec!["the configuration must be a JSON object".into()]));
    };
    let mut f = Fields {
        map,
        problems: Vec::new(),
    };
    let mut warnings = Vec::new();

    let unknown: Vec<String> = f
        .map
        .keys()
        .filter(|k| !KNOWN_FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in unknown {
        f.bad(format!("unknown field `{k}`; known fields: {}", KNOWN_FIELDS.join(", ")));
    }

    let kernel: Option<KernelConfig> = if f.map.contains_key("kernel") {
        f.take("kernel")
    } else {
        f.bad("missing required field `kernel` (kind: mandelbrot, spinimage, synthetic or timestep)".into());
        None
    };
    let n: Option<u64> = f.take("n");
    let p: usize = f.take("p").unwrap_or(DEFAULT_P);
    let t: usize = f.take("t").unwrap_or(DEFAULT_T);
    let repetitions: u32 = f.take("repetitions").unwrap_or(DEFAULT_REPETITIONS);
    let timesteps: u64 = f.take("timesteps").unwrap_or(1);
    let measure: Measure = f.take("measure").unwrap_or(Measure::Repetitions);
    let seed: u64 = f.take("seed").unwrap_or(0);
    let out: PathBuf = flags
        .out
        .clone()
        .or_else(|| f.take::<PathBuf>("out").map(|o| base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("dls-results"));
    f.map.remove("out");
    let trace: TraceMode = f.take("trace").unwrap_or(TraceMode::None);
    let transport: Transport = match f.take::<String>("transport") {
        None => Transport::InProcess,
        Some(s) => s.parse().unwrap_or_else(|e| {
            f.bad(format!("`transport`: {e}"));
            Transport::InProcess
        }),
    };
    let proc_min_chunk: Option<u64> = f.take("proc_min_chunk");
    let thread_min_chunk: u64 = f.take("thread_min_chunk").unwrap_or(1);
    let fsc: Option<FscConfig> = f.take("fsc");
    let warmup: bool = f.take("warmup").unwrap_or(true);
    let serialize_requests = flags.serialize_requests || f.take::<bool>("serialize_requests").unwrap_or(false);
    let allow_oversubscribe = flags.allow_oversubscribe || f.take::<bool>("allow_oversubscribe").unwrap_or(false);
    let override_excluded = flags.override_excluded || f.take::<bool>("override_excluded").unwrap_or(false);

    let thread_techniques = technique_list(&mut f, "thread_techniques", &DEFAULT_THREAD_TECHNIQUES, |s| {
        s.parse::<TechniqueKind>().map_err(|e| e.to_string())
    });
    let proc_techniques = technique_list(&mut f, "proc_techniques", &DEFAULT_PROC_TECHNIQUES, |s| {
        s.parse::<ProcTechnique>().map_err(|e| e.to_string())
    });

    if p == 0 {
        f.bad("`p` must be at least 1".into());
    }
    if t == 0 {
        f.bad("`t` must be at least 1".into());
    }
    if repetitions == 0 {
        f.bad("`repetitions` must be at least 1".into());
    }
    if timesteps == 0 {
        f.bad("`timesteps` must be at least 1".into());
    }
    if thread_min_chunk == 0 {
        f.bad("`thread_min_chunk` must be at least 1".into());
    }
    if let Some(m) = proc_min_chunk {
        if m < thread_min_chunk {
            f.bad(format!("`proc_min_chunk` {m} is below `thread_min_chunk` {thread_min_chunk}"));
        }
    }
    if measure == Measure::Timesteps && timesteps > 1 {
        warnings.push(format!(
            "`timesteps` = {timesteps} is ignored when measuring time-steps; each cell runs `repetitions` = {repetitions} consecutive steps"
        ));
    }

    // techniques left out of the default design need the override
    for &pt in &proc_techniques {
        let why = match pt {
            ProcTechnique::Dls(TechniqueKind::Ss) => Some(SS_RATIONALE),
            ProcTechnique::Dls(TechniqueKind::Wf) => Some(WF_RATIONALE),
            ProcTechnique::Dls(TechniqueKind::Fsc) => Some(FSC_RATIONALE),
            _ => None,
        };
        if let (Some(why), false) = (why, override_excluded) {
            f.bad(format!(
                "process-level {pt} is excluded because {why}; pass --override-excluded to use it anyway"
            ));
        }
    }
    if thread_techniques.contains(&TechniqueKind::Fsc) && !override_excluded {
        f.bad(format!(
            "thread-level FSC is excluded because {FSC_RATIONALE}; pass --override-excluded to use it anyway"
        ));
    }
    let uses_fsc = thread_techniques.contains(&TechniqueKind::Fsc)
        || proc_techniques.contains(&ProcTechnique::Dls(TechniqueKind::Fsc));
    if uses_fsc && fsc.is_none() {
        f.bad("FSC needs `fsc`: {\"overhead\": seconds, \"sigma\": seconds}".into());
    }
    if let Some(c) = &fsc {
        if !(c.overhead > 0.0 && c.overhead.is_finite() && c.sigma > 0.0 && c.sigma.is_finite()) {
            f.bad(format!("`fsc` overhead and sigma must be positive, got {} and {}", c.overhead, c.sigma));
        }
    }

    let awf: BTreeSet<&str> = thread_techniques
        .iter()
        .copied()
        .chain(proc_techniques.iter().filter_map(|p| p.technique()))
        .filter(|t| t.is_awf_family())
        .map(|t| t.name())
        .collect();
    let steps = match measure {
        Measure::Repetitions => timesteps,
        Measure::Timesteps => repetitions as u64,
    };
    if !awf.is_empty() && steps == 1 {
        let names = awf.into_iter().collect::<Vec<_>>().join(", ");
        warnings.push(format!(
            "{names}: designed for time-stepping applications; with a single time-step no weights carry over"
        ));
    }

    let mut n_resolved = n.unwrap_or(0);
    if let Some(k) = &kernel {
        let kernel_n = match k {
            KernelConfig::Mandelbrot(m) => Some(m.width as u64 * m.height as u64),
            KernelConfig::Spinimage(s) => match &s.file {
                Some(file) => {
                    let path = base_dir.join(file);
                    match load_oriented_points::<f64>(&path) {
                        Ok(points) => Some(points.len() as u64),
                        Err(e) => {
                            f.bad(format!("`kernel.file`: {e}"));
                            None
                        }
                    }
                }
                None => Some(n.unwrap_or(DEFAULT_SPIN_IMAGE_POINTS)),
            },
            KernelConfig::Synthetic(_) | KernelConfig::Timestep(_) => Some(n.unwrap_or(DEFAULT_SYNTHETIC_N)),
        };
        if let Some(kn) = kernel_n {
            if let Some(n) = n {
                if n != kn {
                    f.bad(format!("`n` = {n} disagrees with the {} kernel's {kn} tasks", k.name()));
                }
            }
            n_resolved = kn;
        }
        let mult = k.rank_cost_multipliers();
        if !mult.is_empty() && mult.len() != p {
            f.bad(format!(
                "`kernel.rank_cost_multipliers` has {} entries for P = {p}",
                mult.len()
            ));
        }
        if mult.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            f.bad("`kernel.rank_cost_multipliers` entries must be positive".into());
        }
    }
    let is_image = matches!(kernel, Some(KernelConfig::Mandelbrot(_)));
    if n_resolved == 0 && kernel.is_some() && !is_image {
        f.bad("the loop needs at least one task (`n` >= 1)".into());
    }

    // kernel parameters are checked by building the workload
    let kernel = kernel.map(|mut k| {
        if let KernelConfig::Spinimage(s) = &mut k {
            s.file = s.file.take().map(|file| base_dir.join(file));
        }
        k
    });
    if let (Some(k), true) = (&kernel, n_resolved > 0 || is_image) {
        if let Err(e) = Workload::build(k, n_resolved, p, seed) {
            f.bad(format!("`kernel`: {e}"));
        }
    }

    if !f.problems.is_empty() {
        return Err(fail(f.problems));
    }
    Ok(Validated {
        config: ExperimentConfig {
            kernel: kernel.expect("checked above"),
            n: n_resolved,
            p,
            t,
            thread_techniques,
            proc_techniques,
            repetitions,
            timesteps,
            measure,
            seed,
            out,
            trace,
            transport,
            proc_min_chunk,
            thread_min_chunk,
            fsc,
            warmup,
            serialize_requests,
            allow_oversubscribe,
            override_excluded,
        },
        warnings,
    })
}

/// FSC scheduling overhead `h` and task-time deviation `sigma`, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FscConfig {
    pub overhead: f64,
    pub sigma: f64,
}

impl FscConfig {
    pub fn params(self) -> FscParams<f64> {
        FscParams {
            overhead: self.overhead,
            sigma: self.sigma,
        }
    }
}

mod transport_name {
    use dls_runtime::Transport;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Transport, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(t)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Transport, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

fn technique_list<T: Copy + PartialEq + fmt::Display>(
    f: &mut Fields,
    key: &str,
    default: &[T],
    parse: impl Fn(&str) -> Result<T, String>,
) -> Vec<T> {
    let Some(names) = f.take::<Vec<String>>(key) else {
        return default.to_vec();
    };
    if names.is_empty() {
        f.bad(format!("`{key}` must not be empty"));
    }
    let mut out = Vec::new();
    for name in names {
        match parse(&name) {
            Ok(t) if out.contains(&t) => f.bad(format!("`{key}` lists {t} twice")),
            Ok(t) => out.push(t),
            Err(e) => f.bad(format!("`{key}`: {e}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Validated, ConfigError> {
        parse_config(text, Path::new("."), &Flags::default())
    }

    const SYNTH: &str = r#""kernel": {"kind": "synthetic", "base_cost_us": 1}"#;

    #[test]
    fn empty_document_only_lacks_kernel() {
        let e = parse("").unwrap_err();
        assert_eq!(e.problems.len(), 1, "{e}");
        assert!(e.problems[0].contains("kernel"));
    }

    #[test]
    fn defaults() {
        let v = parse(&format!("{{{SYNTH}}}")).unwrap();
        let c = v.config;
        assert_eq!(c.repetitions, 20);
        assert_eq!(c.thread_techniques, DEFAULT_THREAD_TECHNIQUES.to_vec());
        assert_eq!(c.proc_techniques, DEFAULT_PROC_TECHNIQUES.to_vec());
        assert_eq!(c.thread_techniques.len() * c.proc_techniques.len(), 66);
        assert_eq!(c.n, DEFAULT_SYNTHETIC_N);
        assert_eq!((c.measure, c.trace, c.timesteps), (Measure::Repetitions, TraceMode::None, 1));
        // the default process set holds the AWF family
        assert!(v.warnings.iter().any(|w| w.contains("time-stepping")));
    }

    #[test]
    fn process_level_ss_needs_override() {
        let text = format!(r#"{{{SYNTH}, "proc_techniques": ["SS", "GSS"]}}"#);
        let e = parse(&text).unwrap_err();
        assert!(e.problems[0].contains("assigns a single task to a requesting process"), "{e}");
        let flags = Flags {
            override_excluded: true,
            ..Flags::default()
        };
        let v = parse_config(&text, Path::new("."), &flags).unwrap();
        assert_eq!(v.config.proc_techniques[0], ProcTechnique::Dls(TechniqueKind::Ss));
    }

    #[test]
    fn thread_level_fsc_needs_override_and_parameters() {
        let text = format!(r#"{{{SYNTH}, "thread_techniques": ["FSC"]}}"#);
        let e = parse(&text).unwrap_err();
        assert_eq!(e.problems.len(), 2, "{e}");
        let text = format!(r#"{{{SYNTH}, "thread_techniques": ["FSC"], "fsc": {{"overhead": 1e-5, "sigma": 1e-4}}}}"#);
        let flags = Flags {
            override_excluded: true,
            ..Flags::default()
        };
        assert!(parse_config(&text, Path::new("."), &flags).is_ok());
    }

    #[test]
    fn every_problem_is_reported() {
        let text = r#"{
            "p": 0,
            "repetitions": 0,
            "thread_techniques": ["STATIC", "guided", "STATIC"],
            "proc_techniques": [],
            "colour": "blue",
            "measure": "sometimes"
        }"#;
        let e = parse(text).unwrap_err();
        let all = e.problems.join("\n");
        for needle in ["`colour`", "kernel", "`p`", "`repetitions`", "guided", "twice", "must not be empty", "`measure`"] {
            assert!(all.contains(needle), "missing {needle}:\n{all}");
        }
        assert!(all.contains("AWF-E"), "valid names listed:\n{all}");
    }

    #[test]
    fn kernel_parameters_are_checked() {
        let e = parse(r#"{"kernel": {"kind": "mandelbrot", "width": 0}}"#).unwrap_err();
        assert!(e.problems[0].contains("kernel"), "{e}");
        let e = parse(r#"{"kernel": {"kind": "mandelbrot", "widht": 3}}"#).unwrap_err();
        assert!(e.problems[0].contains("widht"), "{e}");
        let e = parse(r#"{"kernel": {"kind": "mandelbrot", "width": 8, "height": 8}, "n": 65}"#).unwrap_err();
        assert!(e.problems[0].contains("64"), "{e}");
        let e = parse(r#"{"kernel": {"kind": "synthetic", "rank_cost_multipliers": [1, 2]}, "p": 3}"#).unwrap_err();
        assert!(e.problems[0].contains("3"), "{e}");
    }

    #[test]
    fn mandelbrot_tasks_are_pixels() {
        let v = parse(r#"{"kernel": {"kind": "mandelbrot", "width": 16, "height": 8}}"#).unwrap();
        assert_eq!(v.config.n, 128);
    }

    #[test]
    fn programmatic_configs_round_trip_through_check() {
        let mut c = ExperimentConfig::with_kernel(KernelConfig::Synthetic(SyntheticConfig {
            distribution: CostDistribution::Hotspot {
                fraction: 0.05,
                multiplier: 20.0,
            },
            base_cost_us: 1.0,
            rank_cost_multipliers: vec![],
        }))
        .unwrap();
        c.transport = Transport::LocalSocket;
        c.check().unwrap();
        c.repetitions = 0;
        assert!(c.check().is_err());
    }
}
