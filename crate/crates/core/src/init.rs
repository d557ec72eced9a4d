//! Network initialization.
//!
//! First-layer breaking lines are spread uniformly over the domain (vertical
//! lines first, then horizontal). With the hidden layers fixed, the network is
//! linear in its output layer, so the output weights and bias are chosen as
//! the least-squares (Galerkin) solution over the span of the constant
//! function and the last-hidden-layer activations:
//!
//! ```text
//! A_ij = Σ_K (Lφ_i)(Lφ_j)(x_K)|K| + α Σ_E |β·n| φ_i φ_j (x_E)|E|,   Lφ = β·∇φ + γ̂φ
//! F_i  = Σ_K f (Lφ_i)(x_K)|K|     + α Σ_E |β·n| g φ_i (x_E)|E|
//! ```
//!
//! Directional derivatives of the basis are exact (forward mode, σ'(0) = 0).
//! `A` is symmetric positive definite when the breaking lines are distinct.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{Domain, IntegrationMesh, Point};
use crate::linalg::{independent_subset, Cholesky, SquareMatrix};
use crate::network::{Architecture, Network};
use crate::problems::BenchmarkProblem;
use crate::reduce::{map_chunks, tree_reduce};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperplane {
    pub normal: Point,
    pub offset: f64,
}

/// Breaking lines `ω_i·x = b_i` of the two-layer basis `{1, σ(ω_i·x − b_i)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    pub planes: Vec<Hyperplane>,
}

impl BasisSet {
    /// Fails on the first pair of planes that coincide after scaling to unit normals.
    pub fn check_distinct(&self) -> Result<()> {
        let normalized: Vec<[f64; 3]> = self
            .planes
            .iter()
            .map(|p| {
                let s = p.normal[0].hypot(p.normal[1]);
                [p.normal[0] / s, p.normal[1] / s, p.offset / s]
            })
            .collect();
        for i in 0..normalized.len() {
            for j in 0..i {
                if normalized[i].iter().zip(&normalized[j]).all(|(a, b)| (a - b).abs() <= 1e-12) {
                    return Err(Error::DegenerateBasis { first: j, second: i });
                }
            }
        }
        Ok(())
    }

    /// Two-layer network with these breaking lines and a zero output layer.
    pub fn to_network(&self) -> Network {
        let n1 = self.planes.len().max(1);
        let mut net = Network::zeros(Architecture::new(vec![2, n1, 1]).expect("valid widths"));
        for (i, p) in self.planes.iter().enumerate() {
            net.row_mut(0, i).copy_from_slice(&[p.normal[0], p.normal[1], p.offset]);
        }
        net
    }
}

/// `⌈n1/2⌉` vertical and `⌊n1/2⌋` horizontal lines, equally spaced.
pub fn uniform_hyperplanes(domain: &Domain, n1: usize) -> BasisSet {
    let nv = n1.div_ceil(2);
    let nh = n1 / 2;
    let mut planes = Vec::with_capacity(n1);
    for k in 1..=nv {
        let x = domain.x_lo + k as f64 * domain.width() / (nv + 1) as f64;
        planes.push(Hyperplane { normal: [1.0, 0.0], offset: x });
    }
    for k in 1..=nh {
        let y = domain.y_lo + k as f64 * domain.height() / (nh + 1) as f64;
        planes.push(Hyperplane { normal: [0.0, 1.0], offset: y });
    }
    BasisSet { planes }
}

/// The normal equations `A c = F`; index 0 is the constant function.
#[derive(Clone, Debug, PartialEq)]
pub struct GalerkinSystem {
    pub a: SquareMatrix,
    pub f: Vec<f64>,
}

impl GalerkinSystem {
    /// `½ cᵀAc − Fᵀc`.
    pub fn energy(&self, c: &[f64]) -> f64 {
        let ac = self.a.mul_vec(c);
        0.5 * ac.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() - self.f.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn residual_norm(&self, c: &[f64]) -> f64 {
        self.a.mul_vec(c).iter().zip(&self.f).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

#[derive(Clone)]
struct Partial {
    a: Vec<f64>,
    f: Vec<f64>,
}

/// Assembles the system whose basis is the constant plus the last hidden layer
/// of `net` (the output layer of `net` is ignored).
pub fn assemble_frozen_basis(
    net: &Network,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    boundary_weight: f64,
) -> GalerkinSystem {
    let depth = net.arch().depth();
    let m = net.layer_shape(depth - 1).0 + 1;
    let accumulate = |p: &mut Partial, phi: &[f64], rhs: f64, w: f64| {
        for i in 0..m {
            let wi = w * phi[i];
            if wi == 0.0 {
                continue;
            }
            p.f[i] += wi * rhs;
            for j in 0..=i {
                p.a[i * m + j] += wi * phi[j];
            }
        }
    };
    let interior = map_chunks(&mesh.cells, |chunk| {
        let mut p = Partial { a: vec![0.0; m * m], f: vec![0.0; m] };
        let (mut vals, mut tans) = (Vec::new(), Vec::new());
        let mut lphi = vec![0.0; m];
        for c in chunk {
            let x = c.centroid;
            let gamma = problem.gamma_hat(x);
            net.last_hidden_with_tangent(x, problem.beta.eval(x), &mut vals, &mut tans);
            lphi[0] = gamma;
            for j in 1..m {
                lphi[j] = tans[j - 1] + gamma * vals[j - 1];
            }
            accumulate(&mut p, &lphi, problem.source(x), c.measure);
        }
        p
    });
    let boundary = map_chunks(&mesh.inflow_edges, |chunk| {
        let mut p = Partial { a: vec![0.0; m * m], f: vec![0.0; m] };
        let (mut vals, mut tans) = (Vec::new(), Vec::new());
        let mut phi = vec![0.0; m];
        for e in chunk {
            net.last_hidden_with_tangent(e.centroid, [0.0, 0.0], &mut vals, &mut tans);
            phi[0] = 1.0;
            phi[1..].copy_from_slice(&vals);
            accumulate(&mut p, &phi, problem.inflow(e.centroid), boundary_weight * e.inflow_weight * e.measure);
        }
        p
    });
    let combine = |mut x: Partial, y: Partial| {
        x.a.iter_mut().zip(&y.a).for_each(|(a, b)| *a += b);
        x.f.iter_mut().zip(&y.f).for_each(|(a, b)| *a += b);
        x
    };
    let zero = || Partial { a: vec![0.0; m * m], f: vec![0.0; m] };
    let total = combine(
        tree_reduce(interior, combine).unwrap_or_else(zero),
        tree_reduce(boundary, combine).unwrap_or_else(zero),
    );
    let mut a = SquareMatrix::zeros(m);
    for i in 0..m {
        for j in 0..=i {
            a[(i, j)] = total.a[i * m + j];
            a[(j, i)] = total.a[i * m + j];
        }
    }
    GalerkinSystem { a, f: total.f }
}

/// Assembles `A c = F` for the two-layer basis; duplicate planes are rejected.
pub fn assemble_system(
    basis: &BasisSet,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    boundary_weight: f64,
) -> Result<GalerkinSystem> {
    basis.check_distinct()?;
    if basis.planes.is_empty() {
        // constant function only
        let net = Network::zeros(Architecture::new(vec![2, 1, 1])?);
        let sys = assemble_frozen_basis(&net, mesh, problem, boundary_weight);
        let mut a = SquareMatrix::zeros(1);
        a[(0, 0)] = sys.a[(0, 0)];
        return Ok(GalerkinSystem { a, f: vec![sys.f[0]] });
    }
    Ok(assemble_frozen_basis(&basis.to_network(), mesh, problem, boundary_weight))
}

/// Solves `A c = F` by Cholesky.
pub fn solve_output_weights(system: &GalerkinSystem) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(&system.a)?;
    let c = chol.solve(&system.f);
    let fnorm = system.f.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r = system.residual_norm(&c);
    if !(r <= 1e-10 * fnorm.max(f64::MIN_POSITIVE)) && fnorm > 0.0 {
        return Err(Error::Numeric(format!("Galerkin solve residual {r:e} exceeds 1e-10·‖F‖ = {:e}", 1e-10 * fnorm)));
    }
    Ok(c)
}

/// Writes `c` into the output layer: weights `c[1..]`, bias `−c[0]`.
pub fn set_output_layer(net: &mut Network, c: &[f64]) {
    let k = net.arch().depth() - 1;
    let (n_in, _) = net.layer_shape(k);
    assert_eq!(c.len(), n_in + 1, "coefficient count must match the last hidden width + 1");
    let row = net.row_mut(k, 0);
    row[..n_in].copy_from_slice(&c[1..]);
    row[n_in] = -c[0];
}

/// Solves `A c = F` restricted to a linearly independent subset of the
/// basis; the remaining coefficients are 0.
///
/// Neurons that vanish on every quadrature point, or coincide with earlier
/// ones on every quadrature point (several breaking lines inside one row of
/// cells), carry no information and are excluded.
pub fn solve_independent(sys: &GalerkinSystem) -> Result<Vec<f64>> {
    let m = sys.f.len();
    let max_diag = (0..m).map(|i| sys.a[(i, i)]).fold(0.0, f64::max);
    let live: Vec<usize> = (0..m).filter(|&i| sys.a[(i, i)] > 1e-14 * max_diag).collect();
    let mut sub = SquareMatrix::zeros(live.len());
    for (r, &i) in live.iter().enumerate() {
        for (s, &j) in live.iter().enumerate() {
            sub[(r, s)] = sys.a[(i, j)];
        }
    }
    let keep: Vec<usize> = independent_subset(&sub).into_iter().map(|r| live[r]).collect();
    let mut reduced = GalerkinSystem { a: SquareMatrix::zeros(keep.len()), f: vec![0.0; keep.len()] };
    for (r, &i) in keep.iter().enumerate() {
        reduced.f[r] = sys.f[i];
        for (s, &j) in keep.iter().enumerate() {
            reduced.a[(r, s)] = sys.a[(i, j)];
        }
    }
    let sol = solve_output_weights(&reduced)?;
    let mut c = vec![0.0; m];
    for (r, &i) in keep.iter().enumerate() {
        c[i] = sol[r];
    }
    Ok(c)
}

/// Re-solves the output layer of `net` over its frozen hidden layers.
pub fn resolve_output_layer(
    net: &mut Network,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    boundary_weight: f64,
) -> Result<()> {
    let sys = assemble_frozen_basis(net, mesh, problem, boundary_weight);
    let c = solve_independent(&sys)?;
    set_output_layer(net, &c);
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum OutputInit {
    /// Galerkin solve over the frozen hidden layers.
    #[default]
    Solve,
    /// Same uniform distribution as the deeper hidden layers.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitOptions {
    pub boundary_weight: f64,
    pub output: OutputInit,
}

impl Default for InitOptions {
    fn default() -> Self {
        Self { boundary_weight: 1.0, output: OutputInit::Solve }
    }
}

/// Half-width `√(1/n_in)` of the uniform distribution for random layers.
pub fn uniform_bound(n_in: usize) -> f64 {
    (1.0 / n_in as f64).sqrt()
}

/// Fills layer `k` (weights and biases) from `U(−√(1/n_in), √(1/n_in))`.
pub fn randomize_layer(net: &mut Network, k: usize, rng: &mut ChaCha8Rng) {
    let (n_in, n_out) = net.layer_shape(k);
    let dist = Uniform::new_inclusive(-uniform_bound(n_in), uniform_bound(n_in));
    for i in 0..n_out {
        for v in net.row_mut(k, i) {
            *v = dist.sample(rng);
        }
    }
}

/// Uniform breaking lines in the first layer, seeded random deeper hidden
/// layers, and a solved (or random) output layer.
pub fn initialize_network(
    arch: &Architecture,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    seed: u64,
    opts: &InitOptions,
) -> Result<Network> {
    let mut net = Network::zeros(arch.clone());
    let n1 = arch.widths()[1];
    let basis = uniform_hyperplanes(&mesh.domain, n1);
    for (i, p) in basis.planes.iter().enumerate() {
        net.row_mut(0, i).copy_from_slice(&[p.normal[0], p.normal[1], p.offset]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = arch.depth();
    for k in 1..depth - 1 {
        randomize_layer(&mut net, k, &mut rng);
    }
    match opts.output {
        OutputInit::Solve => {
            if depth == 2 {
                let sys = assemble_system(&basis, mesh, problem, opts.boundary_weight)?;
                set_output_layer(&mut net, &solve_independent(&sys)?);
            } else {
                resolve_output_layer(&mut net, mesh, problem, opts.boundary_weight)?;
            }
        }
        OutputInit::Random => randomize_layer(&mut net, depth - 1, &mut rng),
    }
    Ok(net)
}
