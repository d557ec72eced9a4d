//! Flat `key = value` run configuration.
//!
//! ```text
//! # vertical interface, small network
//! mode = train
//! problem = vline
//! arch = 2-4-1
//! iterations = 20000
//! schedule = fixed:0.003
//! rho = h/2
//! h = 0.01
//! k = 3
//! output = vline-2-4-1
//! ```
//!
//! Continuation runs list one `stage` per line, in order:
//! `stage = sectors:3 2-6-6-1 100000 decay:0.01,0.2,50000`.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use lsnn_core::continuation::{ContinuationPlan, ContinuationStage};
use lsnn_core::init::OutputInit;
use lsnn_core::metrics::LineSpec;
use lsnn_core::{Architecture, BenchmarkProblem, LossConfig, ProblemKind, Schedule};

/// A configuration problem, always naming the offending field or line.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax { line: usize, message: String },
    Field { field: String, message: String },
}

impl ConfigError {
    fn field(field: &str, message: impl Into<String>) -> Self {
        Self::Field { field: field.into(), message: message.into() }
    }

    pub fn field_name(&self) -> Option<&str> {
        match self {
            Self::Field { field, .. } => Some(field),
            Self::Syntax { .. } => None,
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Syntax { line, message } => write!(f, "config line {line}: {message}"),
            Self::Field { field, message } => write!(f, "invalid `{field}`: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<lsnn_core::Error> for ConfigError {
    fn from(e: lsnn_core::Error) -> Self {
        match e {
            lsnn_core::Error::Config { field, message } => Self::Field { field, message },
            other => Self::field("config", other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Continuation,
    Verify,
    Report,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Train => "train",
            Self::Continuation => "continuation",
            Self::Verify => "verify",
            Self::Report => "report",
        })
    }
}

impl FromStr for Mode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "train" => Self::Train,
            "continuation" => Self::Continuation,
            "verify" => Self::Verify,
            "report" => Self::Report,
            _ => return Err(ConfigError::field("mode", format!("expected train, continuation, verify or report, got `{s}`"))),
        })
    }
}

/// ρ either absolute or as a multiple of h.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RhoSpec {
    Absolute(f64),
    TimesH(f64),
}

impl RhoSpec {
    pub fn resolve(&self, h: f64) -> f64 {
        match *self {
            Self::Absolute(r) => r,
            Self::TimesH(f) => f * h,
        }
    }
}

impl fmt::Display for RhoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Absolute(r) => write!(f, "{r}"),
            Self::TimesH(x) => write!(f, "{x}*h"),
        }
    }
}

impl FromStr for RhoSpec {
    type Err = ConfigError;

    /// `0.005`, `h/2`, `0.5*h`, `0.5h`, `h`.
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        let bad = || ConfigError::field("rho", format!("expected a number, `h/N` or `F*h`, got `{s}`"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if let Ok(v) = t.parse::<f64>() {
            return Ok(Self::Absolute(v));
        }
        if t == "h" {
            return Ok(Self::TimesH(1.0));
        }
        if let Some(d) = t.strip_prefix("h/") {
            return d.parse::<f64>().map(|d| Self::TimesH(1.0 / d)).map_err(|_| bad());
        }
        let f = t.strip_suffix("*h").or_else(|| t.strip_suffix('h')).ok_or_else(bad)?;
        f.parse::<f64>().map(Self::TimesH).map_err(|_| bad())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub problem: Option<ProblemKind>,
    pub arch: Option<Architecture>,
    pub iterations: usize,
    pub schedule: Schedule,
    /// `None`: the problem's default.
    pub rho: Option<RhoSpec>,
    /// `None`: the problem's default.
    pub boundary_weight: Option<f64>,
    pub h: f64,
    /// Mesh size for error metrics; the training mesh when absent.
    pub eval_h: Option<f64>,
    pub seeds: Vec<u64>,
    pub scale_by_speed: bool,
    pub output_init: OutputInit,
    pub record_every: usize,
    /// Cross-section line; the problem's default when absent.
    pub section: Option<LineSpec>,
    pub samples: usize,
    pub stages: Vec<ContinuationStage>,
    /// Network to evaluate in report mode.
    pub checkpoint: Option<PathBuf>,
    pub dump_system: bool,
    /// Relative paths are resolved against the output root.
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Train,
            problem: None,
            arch: None,
            iterations: 20000,
            schedule: Schedule::Fixed(0.003),
            rho: None,
            boundary_weight: None,
            h: 0.01,
            eval_h: None,
            seeds: vec![0],
            scale_by_speed: true,
            output_init: OutputInit::Solve,
            record_every: 100,
            section: None,
            samples: 401,
            stages: Vec::new(),
            checkpoint: None,
            dump_system: false,
            output: None,
        }
    }
}

fn parse_num<T: FromStr>(field: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>().map_err(|_| ConfigError::field(field, format!("cannot parse `{v}`")))
}

fn parse_bool(field: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::field(field, format!("expected true or false, got `{v}`"))),
    }
}

/// `<problem> <arch> <iterations> <schedule>`
fn parse_stage(v: &str) -> Result<ContinuationStage, ConfigError> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    let [problem, arch, iterations, schedule] = parts[..] else {
        return Err(ConfigError::field("stage", format!("expected `<problem> <arch> <iterations> <schedule>`, got `{v}`")));
    };
    Ok(ContinuationStage {
        problem: problem.parse()?,
        arch: arch.parse().map_err(|e: lsnn_core::Error| ConfigError::field("stage", e.to_string()))?,
        iterations: parse_num("stage", iterations)?,
        schedule: schedule.parse()?,
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        let mut k: Option<usize> = None;
        let mut seeds: Option<Vec<u64>> = None;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| ConfigError::Syntax { line: n + 1, message: format!("expected `key = value`, got `{line}`") })?;
            if key != "stage" {
                if seen.iter().any(|s| s == key) {
                    return Err(ConfigError::field(key, "given more than once"));
                }
                seen.push(key.to_string());
            }
            match key {
                "mode" => cfg.mode = value.parse()?,
                "problem" => cfg.problem = Some(value.parse()?),
                "arch" => {
                    cfg.arch = Some(value.parse().map_err(|e: lsnn_core::Error| ConfigError::field("arch", e.to_string()))?)
                }
                "iterations" => cfg.iterations = parse_num(key, value)?,
                "schedule" => cfg.schedule = value.parse()?,
                "rho" => cfg.rho = Some(value.parse()?),
                "boundary_weight" => cfg.boundary_weight = Some(parse_num(key, value)?),
                "h" => cfg.h = parse_num(key, value)?,
                "eval_h" => cfg.eval_h = Some(parse_num(key, value)?),
                "seeds" => {
                    seeds = Some(
                        value.split(',').map(|s| parse_num::<u64>(key, s.trim())).collect::<Result<Vec<_>, _>>()?,
                    )
                }
                "k" => k = Some(parse_num(key, value)?),
                "scale_by_speed" => cfg.scale_by_speed = parse_bool(key, value)?,
                "output_init" => {
                    cfg.output_init = match value {
                        "solve" => OutputInit::Solve,
                        "random" => OutputInit::Random,
                        _ => return Err(ConfigError::field(key, format!("expected solve or random, got `{value}`"))),
                    }
                }
                "record_every" => cfg.record_every = parse_num(key, value)?,
                "section" => {
                    cfg.section = Some(value.parse().map_err(|e: lsnn_core::Error| ConfigError::field(key, e.to_string()))?)
                }
                "samples" => cfg.samples = parse_num(key, value)?,
                "stage" => cfg.stages.push(parse_stage(value)?),
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(value)),
                "dump_system" => cfg.dump_system = parse_bool(key, value)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                other => return Err(ConfigError::field(other, "unknown key")),
            }
        }
        cfg.seeds = match (seeds, k) {
            (Some(s), Some(k)) if s.len() != k => {
                return Err(ConfigError::field("k", format!("k = {k} but {} seeds are listed", s.len())))
            }
            (Some(s), _) => s,
            (None, Some(k)) => (0..k as u64).collect(),
            (None, None) => vec![0],
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn problem(&self) -> Option<BenchmarkProblem> {
        self.problem.map(BenchmarkProblem::new)
    }

    /// Loss settings for `problem` on the training mesh.
    pub fn loss_for(&self, problem: &BenchmarkProblem) -> LossConfig {
        let mut l = LossConfig::for_problem(problem, self.h);
        if let Some(r) = self.rho {
            l.rho = r.resolve(self.h);
        }
        if let Some(a) = self.boundary_weight {
            l.boundary_weight = a;
        }
        l.scale_by_speed = self.scale_by_speed;
        l
    }

    pub fn plan(&self) -> ContinuationPlan {
        if self.stages.is_empty() {
            ContinuationPlan::default_plan()
        } else {
            ContinuationPlan { stages: self.stages.clone() }
        }
    }

    /// Field-level checks that need no computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(ConfigError::field("h", format!("must lie in (0, 1), got {}", self.h)));
        }
        if let Some(e) = self.eval_h {
            if !(e > 0.0 && e <= self.h) {
                return Err(ConfigError::field("eval_h", format!("must lie in (0, h], got {e}")));
            }
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::field("seeds", "at least one seed is required"));
        }
        if self.samples < 2 {
            return Err(ConfigError::field("samples", "need at least 2"));
        }
        if self.record_every == 0 {
            return Err(ConfigError::field("record_every", "must be positive"));
        }
        match self.mode {
            Mode::Train | Mode::Report => {
                let problem = self.problem().ok_or_else(|| ConfigError::field("problem", "required"))?;
                self.loss_for(&problem).validate(self.h)?;
                if self.mode == Mode::Train {
                    if self.arch.is_none() {
                        return Err(ConfigError::field("arch", "required"));
                    }
                    self.schedule.validate(self.iterations)?;
                } else if self.checkpoint.is_none() {
                    return Err(ConfigError::field("checkpoint", "required in report mode"));
                }
            }
            Mode::Continuation => {
                let plan = self.plan();
                plan.validate()?;
                for s in &plan.stages {
                    self.loss_for(&BenchmarkProblem::new(s.problem)).validate(self.h)?;
                }
            }
            Mode::Verify => {}
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode);
        if let Some(p) = self.problem {
            let _ = writeln!(s, "problem = {p}");
        }
        if let Some(a) = &self.arch {
            let _ = writeln!(s, "arch = {a}");
        }
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "schedule = {}", self.schedule);
        if let Some(r) = self.rho {
            let _ = writeln!(s, "rho = {r}");
        }
        if let Some(a) = self.boundary_weight {
            let _ = writeln!(s, "boundary_weight = {a}");
        }
        let _ = writeln!(s, "h = {}", self.h);
        if let Some(e) = self.eval_h {
            let _ = writeln!(s, "eval_h = {e}");
        }
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(","));
        let _ = writeln!(s, "scale_by_speed = {}", self.scale_by_speed);
        let _ = writeln!(
            s,
            "output_init = {}",
            if self.output_init == OutputInit::Solve { "solve" } else { "random" }
        );
        let _ = writeln!(s, "record_every = {}", self.record_every);
        if let Some(l) = &self.section {
            let _ = writeln!(s, "section = {l}");
        }
        let _ = writeln!(s, "samples = {}", self.samples);
        for st in &self.stages {
            let _ = writeln!(s, "stage = {} {} {} {}", st.problem, st.arch, st.iterations, st.schedule);
        }
        if let Some(c) = &self.checkpoint {
            let _ = writeln!(s, "checkpoint = {}", c.display());
        }
        let _ = writeln!(s, "dump_system = {}", self.dump_system);
        if let Some(o) = &self.output {
            let _ = writeln!(s, "output = {}", o.display());
        }
        s
    }
}
