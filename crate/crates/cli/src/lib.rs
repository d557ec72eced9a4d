//! Experiment runner: config-driven runs, table reproductions and artifacts.

pub mod config;
pub mod presets;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use lsnn_core::continuation::{run_continuation_with, StageReport};
use lsnn_core::init::{assemble_system, solve_output_weights, uniform_hyperplanes};
use lsnn_core::metrics::{cross_section, error_metrics, ErrorMetrics, LineSpec};
use lsnn_core::network::{breaking_lines, read_checkpoint, write_checkpoint};
use lsnn_core::train::{best_of_seeds, BestOf, Outcome, TrainConfig, TrainingReport};
use lsnn_core::verify::{run_all, SuiteResult};
use lsnn_core::{BenchmarkProblem, Domain, IntegrationMesh, LossConfig, Network};

use config::{Mode, RunConfig};
use presets::{table7_plan, table_preset, TABLE7};

/// Environment variable naming the directory relative outputs go under.
pub const OUTPUT_ROOT_ENV: &str = "LSNN_OUTPUT_ROOT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("lsnn-output"))
}

/// `cfg.output` (or a name derived from the config) resolved against `root`.
pub fn resolve_output(cfg: &RunConfig, root: &Path) -> PathBuf {
    let default = || {
        let problem = cfg.problem.map(|p| p.to_string().replace(':', "")).unwrap_or_else(|| cfg.mode.to_string());
        match &cfg.arch {
            Some(a) if cfg.mode == Mode::Train => PathBuf::from(format!("{problem}-{a}")),
            _ => PathBuf::from(format!("{problem}-{}", cfg.mode)),
        }
    };
    let p = cfg.output.clone().unwrap_or_else(default);
    if p.is_absolute() {
        p
    } else {
        root.join(p)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |v| v.to_string())
}

pub const METRICS_HEADER: &str = "problem,arch,seed,iterations,outcome,final_loss,rel_l2,rel_vbeta,loss_ratio,params,selected";
pub const HISTORY_HEADER: &str = "iteration,interior,boundary,total,lr";
pub const SECTION_HEADER: &str = "t,x,y,exact,approx";
pub const BREAKING_HEADER: &str = "layer,neuron,segment,x1,y1,x2,y2";
pub const CONTINUATION_HEADER: &str =
    "stage,problem,arch,params,iterations,outcome,rel_l2_un,rel_vbeta_un,loss_ratio_un,rel_l2_u,rel_vbeta_u,loss_ratio_u";
pub const COMPARISON_HEADER: &str =
    "table,arch,params_published,params,rel_l2_published,rel_l2,rel_vbeta_published,rel_vbeta,loss_ratio_published,loss_ratio";
pub const COMPARISON7_HEADER: &str = "table,stage,arch,params_published,params,rel_l2_un_published,rel_l2_un,rel_vbeta_un_published,rel_vbeta_un,rel_l2_u_published,rel_l2_u,loss_ratio_published,loss_ratio";
pub const VERIFY_HEADER: &str = "suite,passed,failed";

fn outcome_label(o: &Outcome) -> String {
    match o {
        Outcome::Completed => "completed".into(),
        Outcome::Diverged { iteration, .. } => format!("diverged@{iteration}"),
        Outcome::Aborted { iteration, .. } => format!("aborted@{iteration}"),
    }
}

fn metrics_row(problem: &BenchmarkProblem, r: &TrainingReport, selected: bool) -> String {
    let m = r.metrics;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        problem.id(),
        r.net.arch(),
        r.seed,
        r.iterations,
        outcome_label(&r.outcome),
        r.final_loss.total,
        fmt_opt(m.map(|m| m.rel_l2)),
        fmt_opt(m.map(|m| m.rel_vbeta)),
        fmt_opt(m.map(|m| m.loss_ratio)),
        r.net.arch().paper_param_count(),
        selected
    )
}

pub fn write_history(path: &Path, r: &TrainingReport) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{HISTORY_HEADER}")?;
    for h in &r.history {
        writeln!(w, "{},{},{},{},{}", h.iteration, h.loss.interior, h.loss.boundary, h.loss.total, h.lr)?;
    }
    Ok(w.flush()?)
}

pub fn write_checkpoint_file(path: &Path, net: &Network) -> Result<()> {
    let mut w = create(path)?;
    write_checkpoint(net, &mut w)?;
    Ok(w.flush()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let f = File::open(path).with_context(|| format!("cannot open checkpoint {}", path.display()))?;
    read_checkpoint(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn write_cross_section<W: Write>(mut w: W, net: &Network, problem: &BenchmarkProblem, line: &LineSpec, samples: usize) -> Result<()> {
    writeln!(w, "{SECTION_HEADER}")?;
    for s in cross_section(net, problem, line, samples)? {
        writeln!(w, "{},{},{},{},{}", s.t, s.x[0], s.x[1], s.exact, s.approx)?;
    }
    Ok(w.flush()?)
}

pub fn write_breaking_lines<W: Write>(mut w: W, net: &Network, domain: &Domain) -> Result<()> {
    writeln!(w, "{BREAKING_HEADER}")?;
    for c in breaking_lines(net, domain) {
        for (k, s) in c.segments.iter().enumerate() {
            writeln!(w, "{},{},{},{},{},{},{}", c.layer, c.neuron, k, s.start[0], s.start[1], s.end[0], s.end[1])?;
        }
    }
    Ok(w.flush()?)
}

fn section_line(cfg: &RunConfig, problem: &BenchmarkProblem) -> Result<LineSpec> {
    match cfg.section {
        Some(l) => Ok(l),
        None => Ok(problem.default_section.parse()?),
    }
}

fn git_revision() -> String {
    let dir = env!("CARGO_MANIFEST_DIR");
    let run = |args: &[&str]| {
        std::process::Command::new("git")
            .arg("-C")
            .arg(dir)
            .args(args)
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
    };
    match run(&["rev-parse", "HEAD"]) {
        Some(rev) => {
            let dirty = run(&["status", "--porcelain"]).is_some_and(|s| !s.is_empty());
            if dirty {
                format!("{rev}+dirty")
            } else {
                rev
            }
        }
        None => "unknown".into(),
    }
}

/// Config echo, versions and timings.
pub fn write_manifest(dir: &Path, command: &str, cfg: Option<&RunConfig>, timings: &[(String, f64)]) -> Result<()> {
    let mut w = create(&dir.join("manifest.txt"))?;
    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    writeln!(w, "command = {command}")?;
    writeln!(w, "lsnn_version = {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "git_revision = {}", git_revision())?;
    writeln!(w, "target = {}-{}", std::env::consts::ARCH, std::env::consts::OS)?;
    writeln!(w, "threads = {}", rayon::current_num_threads())?;
    writeln!(w, "finished_unix = {now}")?;
    for (name, secs) in timings {
        writeln!(w, "wall_clock_s.{name} = {secs:.3}")?;
    }
    if let Some(cfg) = cfg {
        writeln!(w, "# config")?;
        write!(w, "{}", cfg.to_text())?;
        fs::write(dir.join("config.txt"), cfg.to_text())?;
    }
    Ok(w.flush()?)
}

/// Result of a `train` run.
pub struct TrainOutput {
    pub dir: PathBuf,
    pub runs: BestOf,
}

fn train_mode(cfg: &RunConfig, dir: &Path) -> Result<TrainOutput> {
    let problem = cfg.problem().context("`problem` is required")?;
    let arch = cfg.arch.clone().context("`arch` is required")?;
    let mesh = IntegrationMesh::uniform(problem.domain, cfg.h)?.with_inflow(&problem.beta);
    let loss = cfg.loss_for(&problem);
    let mut tc = TrainConfig::new(loss, cfg.schedule, cfg.iterations);
    tc.record_every = cfg.record_every;
    tc.init.output = cfg.output_init;
    tc.validate(cfg.h)?;
    let line = section_line(cfg, &problem)?;
    fs::create_dir_all(dir)?;
    if cfg.dump_system {
        dump_system(dir, &problem, &mesh, &arch, &loss)?;
    }
    let mut runs = best_of_seeds(&problem, &mesh, &arch, &tc, &cfg.seeds)?;
    if let Some(eh) = cfg.eval_h {
        let emesh = IntegrationMesh::uniform(problem.domain, eh)?.with_inflow(&problem.beta);
        for r in &mut runs.reports {
            r.metrics = error_metrics(&r.net, &problem, &emesh, &loss).ok();
        }
    }
    let mut metrics = create(&dir.join("metrics.csv"))?;
    writeln!(metrics, "{METRICS_HEADER}")?;
    let mut timings = Vec::new();
    for (i, r) in runs.reports.iter().enumerate() {
        writeln!(metrics, "{}", metrics_row(&problem, r, i == runs.best))?;
        let sub = dir.join("runs").join(format!("seed_{}", r.seed));
        fs::create_dir_all(&sub)?;
        write_history(&sub.join("loss_history.csv"), r)?;
        write_checkpoint_file(&sub.join("checkpoint.txt"), &r.net)?;
        timings.push((format!("seed_{}", r.seed), r.wall_clock.as_secs_f64()));
    }
    metrics.flush()?;
    let best = runs.best_report();
    write_history(&dir.join("loss_history.csv"), best)?;
    write_checkpoint_file(&dir.join("checkpoint.txt"), &best.net)?;
    write_cross_section(create(&dir.join("cross_section.csv"))?, &best.net, &problem, &line, cfg.samples)?;
    write_breaking_lines(create(&dir.join("breaking_lines.csv"))?, &best.net, &problem.domain)?;
    write_manifest(dir, "run", Some(cfg), &timings)?;
    Ok(TrainOutput { dir: dir.to_path_buf(), runs })
}

/// Writes the two-layer initialization system `A c = F`.
fn dump_system(dir: &Path, problem: &BenchmarkProblem, mesh: &IntegrationMesh, arch: &lsnn_core::Architecture, loss: &LossConfig) -> Result<()> {
    let basis = uniform_hyperplanes(&problem.domain, arch.widths()[1]);
    let sys = assemble_system(&basis, mesh, problem, loss.boundary_weight)?;
    let c = solve_output_weights(&sys)?;
    let mut a = create(&dir.join("galerkin_a.csv"))?;
    writeln!(a, "i,j,a_ij")?;
    for i in 0..sys.f.len() {
        for j in 0..sys.f.len() {
            writeln!(a, "{i},{j},{}", sys.a[(i, j)])?;
        }
    }
    a.flush()?;
    let mut fc = create(&dir.join("galerkin_fc.csv"))?;
    writeln!(fc, "i,f_i,c_i")?;
    for i in 0..sys.f.len() {
        writeln!(fc, "{i},{},{}", sys.f[i], c[i])?;
    }
    Ok(fc.flush()?)
}

fn continuation_row(i: usize, s: &StageReport) -> String {
    let own = s.report.metrics;
    let tgt = s.target;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        i + 1,
        s.stage.problem,
        s.stage.arch,
        s.stage.arch.paper_param_count(),
        s.report.iterations,
        outcome_label(&s.report.outcome),
        fmt_opt(own.map(|m| m.rel_l2)),
        fmt_opt(own.map(|m| m.rel_vbeta)),
        fmt_opt(own.map(|m| m.loss_ratio)),
        fmt_opt(tgt.map(|m| m.rel_l2)),
        fmt_opt(tgt.map(|m| m.rel_vbeta)),
        fmt_opt(tgt.map(|m| m.loss_ratio)),
    )
}

/// Continuation stages for every seed, one directory per seed.
fn continuation_mode(cfg: &RunConfig, dir: &Path) -> Result<Vec<Vec<StageReport>>> {
    let plan = cfg.plan();
    fs::create_dir_all(dir)?;
    let mut all = Vec::new();
    let mut timings = Vec::new();
    for &seed in &cfg.seeds {
        let sub = dir.join(format!("seed_{seed}"));
        fs::create_dir_all(&sub)?;
        let start = Instant::now();
        let stages = run_continuation_with(&plan, cfg.h, seed, |p| cfg.loss_for(p))?;
        timings.push((format!("seed_{seed}"), start.elapsed().as_secs_f64()));
        let mut w = create(&sub.join("continuation.csv"))?;
        writeln!(w, "{CONTINUATION_HEADER}")?;
        for (i, s) in stages.iter().enumerate() {
            writeln!(w, "{}", continuation_row(i, s))?;
            let sd = sub.join(format!("stage_{}", i + 1));
            fs::create_dir_all(&sd)?;
            let problem = BenchmarkProblem::new(s.stage.problem);
            write_history(&sd.join("loss_history.csv"), &s.report)?;
            write_checkpoint_file(&sd.join("checkpoint.txt"), &s.report.net)?;
            let line = section_line(cfg, &problem)?;
            write_cross_section(create(&sd.join("cross_section.csv"))?, &s.report.net, &problem, &line, cfg.samples)?;
            write_breaking_lines(create(&sd.join("breaking_lines.csv"))?, &s.report.net, &problem.domain)?;
        }
        w.flush()?;
        all.push(stages);
    }
    write_manifest(dir, "run", Some(cfg), &timings)?;
    Ok(all)
}

pub fn write_verify(dir: &Path, suites: &[SuiteResult]) -> Result<()> {
    let mut w = create(&dir.join("verify.csv"))?;
    writeln!(w, "{VERIFY_HEADER}")?;
    for s in suites {
        writeln!(w, "{},{},{}", s.name, s.passed, s.failed)?;
    }
    Ok(w.flush()?)
}

fn report_mode(cfg: &RunConfig, dir: &Path) -> Result<ErrorMetrics> {
    let problem = cfg.problem().context("`problem` is required")?;
    let net = load_checkpoint(cfg.checkpoint.as_deref().context("`checkpoint` is required")?)?;
    let mesh = IntegrationMesh::uniform(problem.domain, cfg.eval_h.unwrap_or(cfg.h))?.with_inflow(&problem.beta);
    let m = error_metrics(&net, &problem, &mesh, &cfg.loss_for(&problem))?;
    fs::create_dir_all(dir)?;
    let mut w = create(&dir.join("metrics.csv"))?;
    writeln!(w, "{METRICS_HEADER}")?;
    writeln!(
        w,
        "{},{},,0,loaded,,{},{},{},{},true",
        problem.id(),
        net.arch(),
        m.rel_l2,
        m.rel_vbeta,
        m.loss_ratio,
        m.param_count_paper
    )?;
    w.flush()?;
    let line = section_line(cfg, &problem)?;
    write_cross_section(create(&dir.join("cross_section.csv"))?, &net, &problem, &line, cfg.samples)?;
    write_breaking_lines(create(&dir.join("breaking_lines.csv"))?, &net, &problem.domain)?;
    write_manifest(dir, "run", Some(cfg), &[])?;
    Ok(m)
}

/// What a `run` produced.
pub enum RunOutcome {
    Train(TrainOutput),
    Continuation(Vec<Vec<StageReport>>),
    Verify(Vec<SuiteResult>),
    Report(ErrorMetrics),
}

/// Executes a parsed config, writing artifacts under `dir`.
pub fn run_config(cfg: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    Ok(match cfg.mode {
        Mode::Train => RunOutcome::Train(train_mode(cfg, dir)?),
        Mode::Continuation => RunOutcome::Continuation(continuation_mode(cfg, dir)?),
        Mode::Verify => {
            fs::create_dir_all(dir)?;
            let suites = run_all(cfg.seeds[0]);
            write_verify(dir, &suites)?;
            write_manifest(dir, "run", Some(cfg), &[])?;
            if suites.iter().any(|s| s.failed > 0) {
                bail!("verification failures: {:?}", suites.iter().filter(|s| s.failed > 0).map(|s| s.name).collect::<Vec<_>>());
            }
            RunOutcome::Verify(suites)
        }
        Mode::Report => RunOutcome::Report(report_mode(cfg, dir)?),
    })
}

/// Reads, validates and runs a config file.
pub fn run_file(path: &Path, root: &Path, dump_system: bool) -> Result<(PathBuf, RunOutcome)> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut cfg = RunConfig::parse(&text)?;
    cfg.dump_system |= dump_system;
    let dir = resolve_output(&cfg, root);
    let out = run_config(&cfg, &dir)?;
    Ok((dir, out))
}

/// Knobs for shortened reproductions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproduceOptions {
    pub iters_scale: f64,
    pub h: f64,
    /// Overrides the table's number of seeds.
    pub seeds: Option<usize>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self { iters_scale: 1.0, h: 0.01, seeds: None }
    }
}

/// Runs every row of a table into `dir` and writes `comparison.csv` with
/// published and reproduced values side by side. Returns the CSV path.
pub fn reproduce(table: u8, dir: &Path, opts: &ReproduceOptions) -> Result<PathBuf> {
    if !(opts.iters_scale > 0.0) {
        bail!("--iters-scale must be positive");
    }
    fs::create_dir_all(dir)?;
    let path = dir.join("comparison.csv");
    if table == 7 {
        let cfg = RunConfig {
            mode: Mode::Continuation,
            h: opts.h,
            seeds: (0..opts.seeds.unwrap_or(1) as u64).collect(),
            stages: table7_plan(opts.iters_scale).stages,
            ..RunConfig::default()
        };
        let runs = continuation_mode(&cfg, dir)?;
        let mut w = create(&path)?;
        writeln!(w, "{COMPARISON7_HEADER}")?;
        // the seed whose final stage has the smallest loss
        let best = runs
            .iter()
            .filter(|s| s.last().is_some_and(|l| l.report.final_loss.total.is_finite()))
            .min_by(|a, b| {
                let la = a.last().map_or(f64::INFINITY, |l| l.report.final_loss.total);
                let lb = b.last().map_or(f64::INFINITY, |l| l.report.final_loss.total);
                la.total_cmp(&lb)
            })
            .context("every continuation run failed")?;
        for (label, arch, l2n, vbn, l2u, lr, params) in TABLE7 {
            let Some(s) = best.iter().find(|s| s.stage.arch.to_string() == arch && stage_label(s) == label) else {
                continue;
            };
            let own = s.report.metrics;
            let tgt = s.target;
            writeln!(
                w,
                "7,{label},{arch},{params},{},{l2n},{},{vbn},{},{l2u},{},{lr},{}",
                s.stage.arch.paper_param_count(),
                fmt_opt(own.map(|m| m.rel_l2)),
                fmt_opt(own.map(|m| m.rel_vbeta)),
                fmt_opt(tgt.map(|m| m.rel_l2)),
                fmt_opt(own.map(|m| m.loss_ratio)),
            )?;
        }
        w.flush()?;
        return Ok(path);
    }
    let preset = table_preset(table).with_context(|| format!("no table {table}; expected 1 to 7"))?;
    let mut rows = Vec::new();
    for (cfg, paper) in preset.configs(opts.h, opts.iters_scale, opts.seeds).into_iter().zip(&preset.rows) {
        let out = train_mode(&cfg, &dir.join(paper.arch))?;
        rows.push((paper, out.runs.best_report().clone()));
    }
    let mut w = create(&path)?;
    writeln!(w, "{COMPARISON_HEADER}")?;
    for (p, r) in rows {
        let m = r.metrics;
        writeln!(
            w,
            "{table},{},{},{},{},{},{},{},{},{}",
            p.arch,
            p.params,
            r.net.arch().paper_param_count(),
            p.rel_l2,
            fmt_opt(m.map(|m| m.rel_l2)),
            p.rel_vbeta,
            fmt_opt(m.map(|m| m.rel_vbeta)),
            p.loss_ratio,
            fmt_opt(m.map(|m| m.loss_ratio)),
        )?;
    }
    w.flush()?;
    Ok(path)
}

fn stage_label(s: &StageReport) -> String {
    match s.stage.problem {
        lsnn_core::ProblemKind::Sectors(n) => n.to_string(),
        _ => "curve".into(),
    }
}
