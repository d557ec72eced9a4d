//! Training through a sequence of sector fields.
//!
//! The rotational field is approximated by piecewise-constant fields with
//! `n = 2, 3, …` sectors. Each stage trains on the `n`-sector problem, starting
//! from the previous stage's network grown to a wider architecture, and the
//! last stage trains on the rotational field itself.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Domain, IntegrationMesh};
use crate::init::{initialize_network, resolve_output_layer, uniform_bound};
use crate::loss::LossConfig;
use crate::metrics::{error_metrics, ErrorMetrics};
use crate::network::{Architecture, Network};
use crate::problems::{BenchmarkProblem, ProblemKind};
use crate::train::{train_from, Schedule, TrainConfig, TrainingReport};

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationStage {
    /// `Sectors(n)` or `Rotational`.
    pub problem: ProblemKind,
    pub arch: Architecture,
    pub iterations: usize,
    pub schedule: Schedule,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationPlan {
    pub stages: Vec<ContinuationStage>,
}

impl ContinuationPlan {
    /// `n = 2, 3, 4, 5` on 2-5-5-1, 2-6-6-1, 2-6-6-1, 2-8-8-1, then the
    /// rotational field on 2-25-25-1.
    pub fn default_plan() -> Self {
        let decay = Schedule::PercentDecay { lr0: 0.01, fraction: 0.2, every: 50000 };
        let stage = |problem, arch: &str, iterations, schedule| ContinuationStage {
            problem,
            arch: arch.parse().expect("valid architecture"),
            iterations,
            schedule,
        };
        Self {
            stages: vec![
                stage(ProblemKind::Sectors(2), "2-5-5-1", 50000, Schedule::Fixed(0.003)),
                stage(ProblemKind::Sectors(3), "2-6-6-1", 100000, decay),
                stage(ProblemKind::Sectors(4), "2-6-6-1", 100000, decay),
                stage(ProblemKind::Sectors(5), "2-8-8-1", 100000, decay),
                stage(ProblemKind::Rotational, "2-25-25-1", 150000, decay),
            ],
        }
    }

    /// Multiplies every stage's iteration count (at least one step each) and
    /// schedule intervals by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut p = self.clone();
        for s in &mut p.stages {
            s.iterations = ((s.iterations as f64 * factor).round() as usize).max(1);
            s.schedule = s.schedule.scaled(factor);
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("stage", "a continuation plan needs at least one stage"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if !matches!(s.problem, ProblemKind::Sectors(_) | ProblemKind::Rotational) {
                return Err(Error::config("stage", format!("stage {}: `{}` is not a sector or rotational problem", i + 1, s.problem)));
            }
            s.schedule.validate(s.iterations)?;
            if i > 0 && !self.stages[i - 1].arch.embeds_into(&s.arch) {
                return Err(Error::config(
                    "stage",
                    format!("stage {}: {} does not contain {}", i + 1, s.arch, self.stages[i - 1].arch),
                ));
            }
        }
        Ok(())
    }
}

/// Copies `small` into the top-left blocks of a network with `big`'s widths.
///
/// New first-layer neurons get a random unit normal through a random point of
/// `domain`; other new rows are uniform in `±√(1/n_in)`. Weights between old
/// and new neurons are zero in both directions, so the old neurons compute
/// exactly what they did before. The output layer is left zero for the caller
/// to solve.
pub fn embed_hidden_layers(small: &Network, big: &Architecture, domain: &Domain, seed: u64) -> Result<Network> {
    if !small.arch().embeds_into(big) {
        return Err(Error::Shape(format!("{} does not embed into {big}", small.arch())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::zeros(big.clone());
    let depth = big.depth();
    for k in 0..depth - 1 {
        let (old_in, old_out) = small.layer_shape(k);
        let (new_in, new_out) = net.layer_shape(k);
        for i in 0..old_out {
            for j in 0..old_in {
                net.set_weight(k, i, j, small.weight(k, i, j));
            }
            net.set_bias(k, i, small.bias(k, i));
        }
        for i in old_out..new_out {
            if k == 0 {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let p = [rng.gen_range(domain.x_lo..domain.x_hi), rng.gen_range(domain.y_lo..domain.y_hi)];
                net.row_mut(0, i).copy_from_slice(&[t.cos(), t.sin(), t.cos() * p[0] + t.sin() * p[1]]);
            } else {
                let dist = Uniform::new_inclusive(-uniform_bound(new_in), uniform_bound(new_in));
                for j in old_in..new_in {
                    net.set_weight(k, i, j, dist.sample(&mut rng));
                }
                net.set_bias(k, i, dist.sample(&mut rng));
            }
        }
    }
    Ok(net)
}

/// Grows `small` to `big` and re-solves the output layer for `problem`.
pub fn grow_and_transplant(
    small: &Network,
    big: &Architecture,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    boundary_weight: f64,
    seed: u64,
) -> Result<Network> {
    let mut net = embed_hidden_layers(small, big, &mesh.domain, seed)?;
    resolve_output_layer(&mut net, mesh, problem, boundary_weight)?;
    Ok(net)
}

#[derive(Clone, Debug)]
pub struct StageReport {
    pub stage: ContinuationStage,
    /// Training report; its metrics are against the stage's own solution `u_n`.
    pub report: TrainingReport,
    /// Metrics against the rotational solution `u`.
    pub target: Option<ErrorMetrics>,
}

/// Runs the stages in order on a uniform mesh of size `h`, with each stage's
/// default ρ and inflow weight.
pub fn run_continuation(plan: &ContinuationPlan, h: f64, seed: u64) -> Result<Vec<StageReport>> {
    run_continuation_with(plan, h, seed, |p| LossConfig::for_problem(p, h))
}

/// Like [`run_continuation`] with a caller-chosen loss configuration per
/// stage, also used for the metrics against the rotational solution.
pub fn run_continuation_with(
    plan: &ContinuationPlan,
    h: f64,
    seed: u64,
    loss_for: impl Fn(&BenchmarkProblem) -> LossConfig,
) -> Result<Vec<StageReport>> {
    plan.validate()?;
    let target = BenchmarkProblem::new(ProblemKind::Rotational);
    let mesh_base = IntegrationMesh::uniform(target.domain, h)?;
    let target_mesh = mesh_base.clone().with_inflow(&target.beta);
    let target_cfg = loss_for(&target);
    let mut out: Vec<StageReport> = Vec::with_capacity(plan.stages.len());
    for (i, stage) in plan.stages.iter().enumerate() {
        let problem = BenchmarkProblem::new(stage.problem);
        let mesh = mesh_base.clone().with_inflow(&problem.beta);
        let loss = loss_for(&problem);
        let cfg = TrainConfig::new(loss, stage.schedule, stage.iterations);
        let stage_seed = seed.wrapping_add(i as u64);
        let net = match out.last() {
            None => initialize_network(&stage.arch, &mesh, &problem, stage_seed, &cfg.init)?,
            Some(prev) => grow_and_transplant(&prev.report.net, &stage.arch, &mesh, &problem, loss.boundary_weight, stage_seed)?,
        };
        let report = train_from(net, &problem, &mesh, &cfg, stage_seed)?;
        let target_metrics = error_metrics(&report.net, &target, &target_mesh, &target_cfg).ok();
        out.push(StageReport { stage: stage.clone(), report, target: target_metrics });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::set_output_layer;

    fn random_small(arch: &str, seed: u64) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let arch: Architecture = arch.parse().unwrap();
        let n = arch.raw_param_count();
        Network::from_params(arch, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn mesh_for(p: &BenchmarkProblem, h: f64) -> IntegrationMesh {
        IntegrationMesh::uniform(p.domain, h).unwrap().with_inflow(&p.beta)
    }

    #[test]
    fn embedding_identity() {
        let small = random_small("2-5-5-1", 4);
        let big: Architecture = "2-6-6-1".parse().unwrap();
        let mut grown = embed_hidden_layers(&small, &big, &Domain::unit_square(), 11).unwrap();
        let mut c = vec![-small.bias(2, 0)];
        c.extend((0..5).map(|j| small.weight(2, 0, j)));
        c.push(0.0);
        set_output_layer(&mut grown, &c);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            assert_eq!(grown.forward(x), small.forward(x));
        }
    }

    #[test]
    fn old_parameters_stay_in_place() {
        let small = random_small("2-5-5-1", 8);
        let p = BenchmarkProblem::new(ProblemKind::Sectors(3));
        let mesh = mesh_for(&p, 0.05);
        let big: Architecture = "2-6-6-1".parse().unwrap();
        let grown = grow_and_transplant(&small, &big, &mesh, &p, 1.0, 3).unwrap();
        let mut preserved = 0;
        for k in 0..2 {
            let (n_in, n_out) = small.layer_shape(k);
            for i in 0..n_out {
                for j in 0..n_in {
                    assert_eq!(grown.weight(k, i, j), small.weight(k, i, j));
                    preserved += 1;
                }
                assert_eq!(grown.bias(k, i), small.bias(k, i));
                preserved += 1;
                // nothing flows from new neurons into old ones
                for j in n_in..grown.layer_shape(k).0 {
                    assert_eq!(grown.weight(k, i, j), 0.0);
                }
            }
        }
        // the published count drops one direction parameter per first-layer neuron
        assert_eq!(preserved - 5 + 6, small.arch().paper_param_count());
        assert_eq!(small.arch().paper_param_count(), 46);
        assert!(grow_and_transplant(&grown, &"2-5-5-1".parse().unwrap(), &mesh, &p, 1.0, 0).is_err());
    }

    #[test]
    fn same_architecture_only_resolves_output() {
        let small = random_small("2-5-5-1", 2);
        let p = BenchmarkProblem::new(ProblemKind::Sectors(2));
        let mesh = mesh_for(&p, 0.05);
        let grown = grow_and_transplant(&small, small.arch(), &mesh, &p, 1.0, 0).unwrap();
        let mut expect = small.clone();
        resolve_output_layer(&mut expect, &mesh, &p, 1.0).unwrap();
        assert_eq!(grown, expect);
        for k in 0..2 {
            for i in 0..5 {
                assert_eq!(grown.row(k, i), small.row(k, i));
            }
        }
    }

    #[test]
    fn default_plan_shape() {
        let plan = ContinuationPlan::default_plan();
        plan.validate().unwrap();
        let counts: Vec<usize> = plan.stages.iter().map(|s| s.arch.paper_param_count()).collect();
        assert_eq!(counts, vec![46, 61, 61, 97, 726]);
        assert_eq!(plan.stages.last().unwrap().problem, ProblemKind::Rotational);
        let mut bad = plan.clone();
        bad.stages.swap(1, 4);
        assert!(bad.validate().is_err());
        assert_eq!(plan.scaled(0.1).stages[1].iterations, 10000);
    }

    #[test]
    fn short_run_produces_one_report_per_stage() {
        let mut plan = ContinuationPlan::default_plan().scaled(0.0004);
        plan.stages.truncate(3);
        let reports = run_continuation(&plan, 0.05, 1).unwrap();
        assert_eq!(reports.len(), 3);
        assert_eq!(reports[1].report.net.arch().to_string(), "2-6-6-1");
        assert!(reports.iter().all(|r| r.report.completed() && r.target.is_some()));
    }

    #[test]
    fn final_rotational_stage_metrics_agree_with_target() {
        let plan = ContinuationPlan {
            stages: vec![
                ContinuationStage { problem: ProblemKind::Sectors(2), arch: "2-5-5-1".parse().unwrap(), iterations: 10, schedule: Schedule::Fixed(0.003) },
                ContinuationStage { problem: ProblemKind::Rotational, arch: "2-6-6-1".parse().unwrap(), iterations: 10, schedule: Schedule::Fixed(0.003) },
            ],
        };
        let reports = run_continuation_with(&plan, 0.1, 0, |p| {
            let mut l = LossConfig::for_problem(p, 0.1);
            l.rho = 0.05;
            l
        })
        .unwrap();
        let last = &reports[1];
        assert_eq!(last.report.metrics, last.target);
    }
}
