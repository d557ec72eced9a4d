use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use lsnn_cli::{
    load_checkpoint, output_root, reproduce, run_file, write_breaking_lines, write_cross_section, write_manifest,
    write_verify, ReproduceOptions, RunOutcome,
};
use lsnn_core::metrics::LineSpec;
use lsnn_core::problems::builtin_problem;

#[derive(Parser)]
#[command(name = "lsnn", version, about = "Least-squares ReLU network solver for advection-reaction problems")]
struct Cli {
    /// Worker threads (defaults to all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a key = value config file.
    Run {
        config: PathBuf,
        /// Also write the initialization system A, F and its solution.
        #[arg(long)]
        dump_system: bool,
    },
    /// Reproduce one of the result tables (1 to 7).
    Reproduce {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=7))]
        table: u8,
        /// Multiplies iteration counts and schedule intervals.
        #[arg(long, default_value_t = 1.0)]
        iters_scale: f64,
        #[arg(long, default_value_t = 0.01)]
        h: f64,
        /// Number of seeds, overriding the table's own.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the gradient, construction and initialization self-checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample exact and network solutions along a line, as CSV.
    CrossSection {
        checkpoint: PathBuf,
        /// `x=c`, `y=c`, `y=a*x+b` or `x=a*y+b`.
        line: String,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 401)]
        samples: usize,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Breaking-line segments of a checkpoint, as CSV.
    BreakingLines {
        checkpoint: PathBuf,
        #[arg(long)]
        problem: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve(p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        output_root().join(p)
    }
}

fn execute(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    match cli.command {
        Command::Run { config, dump_system } => {
            let (dir, out) = run_file(&config, &output_root(), dump_system)?;
            match out {
                RunOutcome::Train(t) => {
                    let b = t.runs.best_report();
                    println!("best seed {} loss {:.6e}", b.seed, b.final_loss.total);
                    if let Some(m) = b.metrics {
                        println!("rel_l2 {:.6} rel_vbeta {:.6} loss_ratio {:.6}", m.rel_l2, m.rel_vbeta, m.loss_ratio);
                    }
                }
                RunOutcome::Continuation(runs) => println!("{} continuation run(s)", runs.len()),
                RunOutcome::Verify(s) => println!("{} suites passed", s.len()),
                RunOutcome::Report(m) => {
                    println!("rel_l2 {:.6} rel_vbeta {:.6} loss_ratio {:.6}", m.rel_l2, m.rel_vbeta, m.loss_ratio)
                }
            }
            println!("artifacts in {}", dir.display());
        }
        Command::Reproduce { table, iters_scale, h, k, out } => {
            let dir = resolve(out.unwrap_or_else(|| PathBuf::from(format!("table{table}"))));
            let path = reproduce(table, &dir, &ReproduceOptions { iters_scale, h, seeds: k })?;
            print!("{}", fs::read_to_string(&path)?);
            println!("written to {}", path.display());
        }
        Command::Verify { seed, out } => {
            let dir = resolve(out.unwrap_or_else(|| PathBuf::from("verify")));
            fs::create_dir_all(&dir)?;
            let suites = lsnn_core::verify::run_all(seed);
            write_verify(&dir, &suites)?;
            write_manifest(&dir, "verify", None, &[])?;
            let mut failed = false;
            for s in &suites {
                println!("{:<14} passed {:>4} failed {:>4}", s.name, s.passed, s.failed);
                for f in &s.failures {
                    println!("  {f}");
                }
                failed |= s.failed > 0;
            }
            if failed {
                anyhow::bail!("verification failed");
            }
        }
        Command::CrossSection { checkpoint, line, problem, samples, out } => {
            let net = load_checkpoint(&checkpoint)?;
            let problem = builtin_problem(&problem)?;
            let line: LineSpec = line.parse()?;
            match out {
                Some(p) => write_cross_section(BufWriter::new(File::create(&p)?), &net, &problem, &line, samples)?,
                None => write_cross_section(std::io::stdout().lock(), &net, &problem, &line, samples)?,
            }
        }
        Command::BreakingLines { checkpoint, problem, out } => {
            let net = load_checkpoint(&checkpoint)?;
            let problem = builtin_problem(&problem)?;
            match out {
                Some(p) => write_breaking_lines(BufWriter::new(File::create(&p)?), &net, &problem.domain)?,
                None => write_breaking_lines(std::io::stdout().lock(), &net, &problem.domain)?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
