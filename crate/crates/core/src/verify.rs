//! Self-checks run by `lsnn verify`: exact constructions, gradient against
//! finite differences, and positive definiteness of the initialization system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{IntegrationMesh, Point};
use crate::init::{assemble_system, solve_output_weights, BasisSet, Hyperplane};
use crate::loss::{LeastSquares, LossConfig};
use crate::network::{construct_lemma32, construct_lemma51, RampSpec, TwoRampSpec};
use crate::network::{Architecture, Network, Workspace};
use crate::problems::{builtin_problem, BenchmarkProblem, INTERFACE_RADIUS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// First few failure descriptions.
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self { name, passed: 0, failed: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < 5 {
                self.failures.push(what());
            }
        }
    }
}

fn random_point(p: &BenchmarkProblem, rng: &mut ChaCha8Rng) -> Point {
    let d = &p.domain;
    [rng.gen_range(d.x_lo..d.x_hi), rng.gen_range(d.y_lo..d.y_hi)]
}

/// Ramp and two-ramp networks against their closed forms at random points.
pub fn construction_suite(seed: u64) -> SuiteResult {
    let mut r = SuiteResult::new("constructions");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi1 = normalize([1.0, std::f64::consts::SQRT_2 - 1.0]);
    let xi2 = normalize([std::f64::consts::SQRT_2 - 1.0, 1.0]);
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let ramp = RampSpec { xi: [1.0, 0.0], c: std::f64::consts::FRAC_PI_3, alpha1: 0.0, alpha2: 1.0, eps };
        let two = TwoRampSpec { xi1, xi2, a: INTERFACE_RADIUS, alpha1: -1.0, alpha2: 1.0, eps };
        let (Ok(n1), Ok(n2)) = (construct_lemma32(&ramp), construct_lemma51(&two)) else {
            r.check(false, || format!("construction failed for eps = {eps}"));
            continue;
        };
        for _ in 0..1000 {
            let x = [rng.gen_range(0.0..2.0), rng.gen_range(0.0..1.0)];
            let (a, b) = (n1.forward(x), ramp.eval(x));
            r.check((a - b).abs() <= 1e-14, || format!("ramp eps={eps} at {x:?}: {a} vs {b}"));
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let p1 = RampSpec { xi: xi1, c: INTERFACE_RADIUS, alpha1: -1.0, alpha2: 1.0, eps }.eval(x);
            let p2 = RampSpec { xi: xi2, c: INTERFACE_RADIUS, alpha1: -1.0, alpha2: 1.0, eps }.eval(x);
            let (a, b) = (n2.forward(x), p1.max(p2));
            r.check((a - b).abs() <= 1e-14, || format!("max of ramps eps={eps} at {x:?}: {a} vs {b}"));
        }
    }
    r
}

fn normalize(v: Point) -> Point {
    let n = v[0].hypot(v[1]);
    [v[0] / n, v[1] / n]
}

/// Smallest |pre-activation| over the hidden neurons at `x`.
fn kink_distance(net: &Network, x: Point, ws: &mut Workspace) -> f64 {
    net.forward_cached(x, ws);
    ws.pre_activations().iter().flatten().fold(f64::INFINITY, |m, z| m.min(z.abs()))
}

/// Loss gradient against central differences along random directions, on
/// networks whose kinks stay away from every quadrature point.
pub fn gradient_suite(seed: u64, nets_per_problem: usize) -> SuiteResult {
    let mut r = SuiteResult::new("gradient");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (id, arch) in [("vline", "2-4-1"), ("twosector", "2-5-5-1"), ("rotational", "2-6-6-1")] {
        let p = builtin_problem(id).expect("builtin");
        let h = 0.05;
        let mesh = IntegrationMesh::uniform(p.domain, h).expect("mesh").with_inflow(&p.beta);
        let cfg = LossConfig::for_problem(&p, h);
        let ls = LeastSquares::new(&mesh, &p, &cfg).expect("loss");
        let arch: Architecture = arch.parse().expect("arch");
        let pts = quadrature_points(&mesh, cfg.rho, &p);
        let mut made = 0;
        let mut attempts = 0;
        while made < nets_per_problem && attempts < 200 * nets_per_problem {
            attempts += 1;
            let n = arch.raw_param_count();
            let net = Network::from_params(arch.clone(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("net");
            let mut ws = Workspace::new(&arch);
            let step = 1e-6;
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            // a step of size `step` along `dir` moves each pre-activation by at most this much
            let margin = 10.0 * step * dir.iter().map(|d| d.abs()).sum::<f64>() * 4.0;
            if pts.iter().any(|&x| kink_distance(&net, x, &mut ws) < margin) {
                continue;
            }
            made += 1;
            let (_, g) = ls.value_and_gradient(&net).expect("gradient");
            let shifted = |s: f64| {
                let params = net.params().iter().zip(&dir).map(|(p, d)| p + s * d).collect();
                ls.value(&Network::from_params(arch.clone(), params).expect("net")).expect("loss").total
            };
            let fd = (shifted(step) - shifted(-step)) / (2.0 * step);
            let exact: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            let rel = (fd - exact).abs() / exact.abs().max(1e-8);
            r.check(rel <= 1e-5, || format!("{id}: directional derivative {exact} vs FD {fd} (rel {rel:e})"));
        }
        r.check(made == nets_per_problem, || format!("{id}: only {made} kink-free networks found"));
    }
    r
}

fn quadrature_points(mesh: &IntegrationMesh, rho: f64, p: &BenchmarkProblem) -> Vec<Point> {
    let mut pts = Vec::new();
    for c in &mesh.cells {
        let x = c.centroid;
        pts.push(x);
        if let Ok(u) = p.beta.unit(x) {
            pts.push([x[0] - rho * u[0], x[1] - rho * u[1]]);
        }
    }
    pts.extend(mesh.inflow_edges.iter().map(|e| e.centroid));
    pts
}

/// Cholesky of the initialization system for random distinct bases.
pub fn spd_suite(seed: u64, bases_per_problem: usize) -> SuiteResult {
    let mut r = SuiteResult::new("spd");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in ["vline", "diagonal"] {
        let p = builtin_problem(id).expect("builtin");
        let mesh = IntegrationMesh::uniform(p.domain, 0.02).expect("mesh").with_inflow(&p.beta);
        for _ in 0..bases_per_problem {
            let n = rng.gen_range(2..=20);
            let planes = (0..n)
                .map(|_| {
                    let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let q = random_point(&p, &mut rng);
                    let normal = [t.cos(), t.sin()];
                    Hyperplane { normal, offset: normal[0] * q[0] + normal[1] * q[1] }
                })
                .collect();
            let res = assemble_system(&BasisSet { planes }, &mesh, &p, 1.0).and_then(|s| {
                if s.a.max_asymmetry() > 1e-12 {
                    return Err(crate::Error::Numeric("asymmetric system".into()));
                }
                solve_output_weights(&s)
            });
            r.check(res.is_ok(), || format!("{id}, {n} lines: {}", res.unwrap_err()));
        }
    }
    r
}

/// All suites with their default sizes.
pub fn run_all(seed: u64) -> Vec<SuiteResult> {
    vec![construction_suite(seed), gradient_suite(seed, 5), spd_suite(seed, 50)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass() {
        for s in [construction_suite(1), gradient_suite(2, 2), spd_suite(3, 5)] {
            assert_eq!(s.failed, 0, "{}: {:?}", s.name, s.failures);
            assert!(s.passed > 0);
        }
    }
}
