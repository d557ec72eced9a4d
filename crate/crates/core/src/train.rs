//! Full-batch Adam on the discrete least-squares functional.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::IntegrationMesh;
use crate::init::{initialize_network, InitOptions, OutputInit};
use crate::loss::{LeastSquares, LossConfig, LossValue};
use crate::metrics::{error_metrics, ErrorMetrics};
use crate::network::{Architecture, Network};
use crate::problems::BenchmarkProblem;

/// Learning rate as a function of the 0-based iteration `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule {
    Fixed(f64),
    /// `lr0 − delta·⌊t/every⌋`
    StepDecrease { lr0: f64, delta: f64, every: usize },
    /// `lr0 · 2^−⌊t/every⌋`
    Halving { lr0: f64, every: usize },
    /// `lr0 · (1 − fraction)^⌊t/every⌋`
    PercentDecay { lr0: f64, fraction: f64, every: usize },
}

impl Schedule {
    pub fn lr_at(&self, t: usize) -> f64 {
        match *self {
            Self::Fixed(lr) => lr,
            Self::StepDecrease { lr0, delta, every } => lr0 - delta * (t / every) as f64,
            Self::Halving { lr0, every } => lr0 * 0.5f64.powi((t / every) as i32),
            Self::PercentDecay { lr0, fraction, every } => lr0 * (1.0 - fraction).powi((t / every) as i32),
        }
    }

    /// The same schedule with every switching interval multiplied by `factor`
    /// (at least one iteration), for shortened runs.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |every: usize| ((every as f64 * factor).round() as usize).max(1);
        match *self {
            Self::Fixed(lr) => Self::Fixed(lr),
            Self::StepDecrease { lr0, delta, every } => Self::StepDecrease { lr0, delta, every: s(every) },
            Self::Halving { lr0, every } => Self::Halving { lr0, every: s(every) },
            Self::PercentDecay { lr0, fraction, every } => Self::PercentDecay { lr0, fraction, every: s(every) },
        }
    }

    /// Checks that every rate applied within `iterations` steps is positive.
    pub fn validate(&self, iterations: usize) -> Result<()> {
        let err = |m: String| Err(Error::config("schedule", m));
        let (lr0, every) = match *self {
            Self::Fixed(lr) => (lr, 1),
            Self::StepDecrease { lr0, every, .. } | Self::Halving { lr0, every } => (lr0, every),
            Self::PercentDecay { lr0, fraction, every } => {
                if !(0.0..1.0).contains(&fraction) {
                    return err(format!("decay fraction must lie in [0, 1), got {fraction}"));
                }
                (lr0, every)
            }
        };
        if !(lr0 > 0.0 && lr0.is_finite()) {
            return err(format!("initial rate must be positive, got {lr0}"));
        }
        if every == 0 {
            return err("`every` must be positive".into());
        }
        let last = self.lr_at(iterations.saturating_sub(1));
        if !(last > 0.0) {
            return err(format!("rate at iteration {} is {last}, not positive", iterations.saturating_sub(1)));
        }
        Ok(())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(lr) => write!(f, "fixed:{lr}"),
            Self::StepDecrease { lr0, delta, every } => write!(f, "step:{lr0},{delta},{every}"),
            Self::Halving { lr0, every } => write!(f, "halving:{lr0},{every}"),
            Self::PercentDecay { lr0, fraction, every } => write!(f, "decay:{lr0},{fraction},{every}"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `fixed:lr`, `step:lr0,delta,every`, `halving:lr0,every`, `decay:lr0,fraction,every`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("schedule", format!("cannot parse `{s}`"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let num = |i: usize| args.get(i).and_then(|a| a.parse::<f64>().ok()).ok_or_else(bad);
        let int = |i: usize| args.get(i).and_then(|a| a.parse::<usize>().ok()).ok_or_else(bad);
        let expect = |n: usize| if args.len() == n { Ok(()) } else { Err(bad()) };
        Ok(match kind {
            "fixed" => {
                expect(1)?;
                Self::Fixed(num(0)?)
            }
            "step" => {
                expect(3)?;
                Self::StepDecrease { lr0: num(0)?, delta: num(1)?, every: int(2)? }
            }
            "halving" => {
                expect(2)?;
                Self::Halving { lr0: num(0)?, every: int(1)? }
            }
            "decay" => {
                expect(3)?;
                Self::PercentDecay { lr0: num(0)?, fraction: num(1)?, every: int(2)? }
            }
            _ => return Err(bad()),
        })
    }
}

/// Adam with β₁ = 0.9, β₂ = 0.999, ε = 1e-8 and bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "Adam state has {} entries, got {} parameters and {} gradient entries",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient entry {i} at step {}", self.t + 1)));
        }
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let c2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
        Ok(())
    }
}

/// Optimizer state of one run.
#[derive(Clone, Debug)]
pub struct TrainState {
    pub net: Network,
    pub adam: Adam,
    pub seed: u64,
    pub history: Vec<HistoryRow>,
}

impl TrainState {
    pub fn new(net: Network, seed: u64) -> Self {
        let adam = Adam::new(net.num_params());
        Self { net, adam, seed, history: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: usize,
    pub loss: LossValue,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    /// The loss exceeded `DIVERGENCE_FACTOR` times its initial value.
    Diverged { iteration: usize, loss: f64 },
    /// A non-finite loss or gradient stopped the run.
    Aborted { iteration: usize, message: String },
}

pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Everything one training run needs besides the problem and mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub loss: LossConfig,
    pub schedule: Schedule,
    pub iterations: usize,
    pub record_every: usize,
    pub init: InitOptions,
}

impl TrainConfig {
    pub fn new(loss: LossConfig, schedule: Schedule, iterations: usize) -> Self {
        Self {
            loss,
            schedule,
            iterations,
            record_every: 100,
            init: InitOptions { boundary_weight: loss.boundary_weight, ..Default::default() },
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        self.loss.validate(h)?;
        self.schedule.validate(self.iterations)?;
        if self.record_every == 0 {
            return Err(Error::config("record_every", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainingReport {
    pub net: Network,
    pub final_loss: LossValue,
    /// Every `record_every` iterations plus the final state.
    pub history: Vec<HistoryRow>,
    /// Metrics of the final parameters (absent only if they could not be evaluated).
    pub metrics: Option<ErrorMetrics>,
    pub seed: u64,
    pub schedule: Schedule,
    pub wall_clock: Duration,
    /// Steps actually taken.
    pub iterations: usize,
    pub outcome: Outcome,
}

impl TrainingReport {
    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }
}

/// Initializes a network for `arch` and trains it.
pub fn train(
    problem: &BenchmarkProblem,
    mesh: &IntegrationMesh,
    arch: &Architecture,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainingReport> {
    cfg.validate(mesh.h)?;
    let net = initialize_network(arch, mesh, problem, seed, &cfg.init)?;
    train_from(net, problem, mesh, cfg, seed)
}

/// Trains from given parameters for exactly `cfg.iterations` steps, unless the
/// run diverges or hits a non-finite value.
pub fn train_from(
    net: Network,
    problem: &BenchmarkProblem,
    mesh: &IntegrationMesh,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainingReport> {
    cfg.validate(mesh.h)?;
    let start = Instant::now();
    let ls = LeastSquares::new(mesh, problem, &cfg.loss)?;
    let mut state = TrainState::new(net, seed);
    let mut initial = None;
    let mut outcome = Outcome::Completed;
    let mut taken = 0;
    for t in 0..cfg.iterations {
        let (loss, grad) = match ls.value_and_gradient(&state.net) {
            Ok(v) => v,
            Err(e) => {
                outcome = Outcome::Aborted { iteration: t, message: e.to_string() };
                break;
            }
        };
        let initial_total = *initial.get_or_insert(loss.total);
        if loss.total > DIVERGENCE_FACTOR * initial_total {
            outcome = Outcome::Diverged { iteration: t, loss: loss.total };
            break;
        }
        let lr = cfg.schedule.lr_at(t);
        if t % cfg.record_every == 0 {
            state.history.push(HistoryRow { iteration: t, loss, lr });
        }
        if let Err(e) = state.adam.step(state.net.params_mut(), &grad, lr) {
            outcome = Outcome::Aborted { iteration: t, message: e.to_string() };
            break;
        }
        taken = t + 1;
    }
    let final_loss = match ls.value(&state.net) {
        Ok(v) => v,
        Err(e) => {
            if outcome == Outcome::Completed {
                outcome = Outcome::Aborted { iteration: taken, message: e.to_string() };
            }
            LossValue { interior: f64::NAN, boundary: f64::NAN, total: f64::NAN }
        }
    };
    if state.history.last().is_none_or(|r| r.iteration != taken) {
        let lr = cfg.schedule.lr_at(taken.saturating_sub(1));
        state.history.push(HistoryRow { iteration: taken, loss: final_loss, lr });
    }
    let metrics = error_metrics(&state.net, problem, mesh, &cfg.loss).ok();
    Ok(TrainingReport {
        net: state.net,
        final_loss,
        history: state.history,
        metrics,
        seed,
        schedule: cfg.schedule,
        wall_clock: start.elapsed(),
        iterations: taken,
        outcome,
    })
}

/// All runs of a best-of-k selection; `best` indexes the completed run with
/// the smallest final loss.
#[derive(Clone, Debug)]
pub struct BestOf {
    pub best: usize,
    pub reports: Vec<TrainingReport>,
}

impl BestOf {
    pub fn best_report(&self) -> &TrainingReport {
        &self.reports[self.best]
    }
}

/// Index of the completed report with the smallest final loss.
pub fn select_best(reports: &[TrainingReport]) -> Result<usize> {
    reports
        .iter()
        .enumerate()
        .filter(|(_, r)| r.completed() && r.final_loss.total.is_finite())
        .min_by(|a, b| a.1.final_loss.total.total_cmp(&b.1.final_loss.total))
        .map(|(i, _)| i)
        .ok_or(Error::AllRunsAborted(reports.len()))
}

/// Trains once per seed and keeps every report.
pub fn best_of_seeds(
    problem: &BenchmarkProblem,
    mesh: &IntegrationMesh,
    arch: &Architecture,
    cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<BestOf> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "at least one seed is required"));
    }
    // two-layer networks with a solved output layer do not depend on the seed
    let seed_free = arch.depth() == 2 && cfg.init.output == OutputInit::Solve;
    let reports = if seed_free {
        let first = train(problem, mesh, arch, cfg, seeds[0])?;
        seeds.iter().map(|&s| TrainingReport { seed: s, ..first.clone() }).collect()
    } else {
        seeds.iter().map(|&s| train(problem, mesh, arch, cfg, s)).collect::<Result<Vec<_>>>()?
    };
    Ok(BestOf { best: select_best(&reports)?, reports })
}
