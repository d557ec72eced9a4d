//! Discrete least-squares functional.
//!
//! ```text
//! L_T(v) = Σ_K (v_β + γ̂ v − f)²(x_K) |K|  +  α Σ_E |β·n| (v − g)²(x_E) |E|
//! ```
//!
//! with the directional derivative replaced by the backward difference along
//! the unit field direction β̄:
//!
//! ```text
//! v_β(x_K) ≈ |β(x_K)| · (v(x_K) − v(x_K − ρ β̄(x_K))) / ρ
//! ```
//!
//! The `|β|` factor turns the derivative along β̄ into β·∇v; it is 1 for unit
//! fields and can be switched off with [`LossConfig::scale_by_speed`].
//! Backward points may leave Ω near the inflow boundary; the network is
//! evaluated there without clamping.

use crate::error::{Error, Result};
use crate::geometry::{IntegrationMesh, Point};
use crate::network::{Network, Workspace};
use crate::problems::BenchmarkProblem;
use crate::reduce::{add_into, map_chunks, tree_reduce};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Backward-difference offset ρ; must be smaller than the mesh size.
    pub rho: f64,
    /// Multiplier α on the inflow term.
    pub boundary_weight: f64,
    /// Multiply the difference quotient by |β(x_K)|.
    pub scale_by_speed: bool,
}

impl LossConfig {
    /// The problem's default ρ (as a fraction of `h`) and α.
    pub fn for_problem(problem: &BenchmarkProblem, h: f64) -> Self {
        Self {
            rho: problem.default_rho_fraction * h,
            boundary_weight: problem.default_boundary_weight,
            scale_by_speed: true,
        }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::config("rho", format!("must be positive, got {}", self.rho)));
        }
        if self.rho >= h {
            return Err(Error::config("rho", format!("must be smaller than h = {h}, got {}", self.rho)));
        }
        if !(self.boundary_weight > 0.0) || !self.boundary_weight.is_finite() {
            return Err(Error::config(
                "boundary_weight",
                format!("must be positive, got {}", self.boundary_weight),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LossValue {
    pub interior: f64,
    pub boundary: f64,
    pub total: f64,
}

/// Backward difference quotient `(v(x) − v(x − ρ β̄)) / ρ`.
pub fn fd_directional_derivative<F: Fn(Point) -> f64>(v: F, x: Point, beta_unit: Point, rho: f64) -> f64 {
    let back = [x[0] - rho * beta_unit[0], x[1] - rho * beta_unit[1]];
    (v(x) - v(back)) / rho
}

/// Residual `a·N(x) − b·N(back) − f` weighted by `|K|`.
#[derive(Clone, Copy, Debug)]
struct InteriorPoint {
    x: Point,
    back: Point,
    coef_x: f64,
    coef_back: f64,
    source: f64,
    measure: f64,
}

#[derive(Clone, Copy, Debug)]
struct InflowPoint {
    x: Point,
    data: f64,
    /// |β·n| |E|
    weight: f64,
}

/// The discrete functional with all geometry and data pre-evaluated, ready
/// for repeated evaluation at different parameters.
#[derive(Clone, Debug)]
pub struct LeastSquares {
    interior: Vec<InteriorPoint>,
    inflow: Vec<InflowPoint>,
    boundary_weight: f64,
}

impl LeastSquares {
    pub fn new(mesh: &IntegrationMesh, problem: &BenchmarkProblem, cfg: &LossConfig) -> Result<Self> {
        cfg.validate(mesh.h)?;
        Self::build(mesh, problem, cfg)
    }

    /// Like [`LeastSquares::new`] but allows ρ ≥ h, for evaluation on meshes
    /// finer than the training mesh.
    pub fn for_evaluation(mesh: &IntegrationMesh, problem: &BenchmarkProblem, cfg: &LossConfig) -> Result<Self> {
        cfg.validate(f64::INFINITY)?;
        Self::build(mesh, problem, cfg)
    }

    fn build(mesh: &IntegrationMesh, problem: &BenchmarkProblem, cfg: &LossConfig) -> Result<Self> {
        if mesh.inflow_edges.is_empty() {
            return Err(Error::config("mesh", "no inflow edges: the problem is ill-posed"));
        }
        let rho = cfg.rho;
        let interior = mesh
            .cells
            .iter()
            .map(|c| {
                let x = c.centroid;
                let unit = problem.beta.unit(x)?;
                let speed = if cfg.scale_by_speed { problem.beta.speed(x) } else { 1.0 };
                let d = speed / rho;
                Ok(InteriorPoint {
                    x,
                    back: [x[0] - rho * unit[0], x[1] - rho * unit[1]],
                    coef_x: d + problem.gamma_hat(x),
                    coef_back: d,
                    source: problem.source(x),
                    measure: c.measure,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let inflow = mesh
            .inflow_edges
            .iter()
            .map(|e| InflowPoint {
                x: e.centroid,
                data: problem.inflow(e.centroid),
                weight: e.inflow_weight * e.measure,
            })
            .collect();
        Ok(Self { interior, inflow, boundary_weight: cfg.boundary_weight })
    }

    /// The same functional with `f = 0` and `g = 0`.
    pub fn homogeneous(&self) -> Self {
        let mut h = self.clone();
        h.interior.iter_mut().for_each(|p| p.source = 0.0);
        h.inflow.iter_mut().for_each(|p| p.data = 0.0);
        h
    }

    pub fn with_boundary_weight(mut self, alpha: f64) -> Self {
        self.boundary_weight = alpha;
        self
    }

    pub fn boundary_weight(&self) -> f64 {
        self.boundary_weight
    }

    pub fn num_cells(&self) -> usize {
        self.interior.len()
    }

    fn finish(&self, interior: f64, boundary: f64, net: &Network) -> Result<LossValue> {
        let total = interior + self.boundary_weight * boundary;
        if total.is_finite() {
            return Ok(LossValue { interior, boundary, total });
        }
        Err(self.locate_non_finite(net))
    }

    fn locate_non_finite(&self, net: &Network) -> Error {
        for (k, p) in self.interior.iter().enumerate() {
            let r = p.coef_x * net.forward(p.x) - p.coef_back * net.forward(p.back) - p.source;
            if !r.is_finite() {
                return Error::Numeric(format!("non-finite residual in cell {k} at {:?}", p.x));
            }
        }
        for (k, p) in self.inflow.iter().enumerate() {
            if !(net.forward(p.x) - p.data).is_finite() {
                return Error::Numeric(format!("non-finite residual on inflow edge {k} at {:?}", p.x));
            }
        }
        Error::Numeric("non-finite loss".into())
    }

    pub fn value(&self, net: &Network) -> Result<LossValue> {
        let arch = net.arch();
        let interior = map_chunks(&self.interior, |chunk| {
            let mut ws = Workspace::new(arch);
            let mut s = 0.0;
            for p in chunk {
                let r = p.coef_x * net.forward_cached(p.x, &mut ws)
                    - p.coef_back * net.forward_cached(p.back, &mut ws)
                    - p.source;
                s += r * r * p.measure;
            }
            s
        });
        let boundary = map_chunks(&self.inflow, |chunk| {
            let mut ws = Workspace::new(arch);
            chunk
                .iter()
                .map(|p| {
                    let e = net.forward_cached(p.x, &mut ws) - p.data;
                    p.weight * e * e
                })
                .sum::<f64>()
        });
        let interior = tree_reduce(interior, |a, b| a + b).unwrap_or(0.0);
        let boundary = tree_reduce(boundary, |a, b| a + b).unwrap_or(0.0);
        self.finish(interior, boundary, net)
    }

    /// Loss and its exact gradient with respect to the flat parameters.
    pub fn value_and_gradient(&self, net: &Network) -> Result<(LossValue, Vec<f64>)> {
        let arch = net.arch();
        let n = net.num_params();
        let alpha = self.boundary_weight;
        let interior = map_chunks(&self.interior, |chunk| {
            let mut at_x = Workspace::new(arch);
            let mut at_back = Workspace::new(arch);
            let mut grad = vec![0.0; n];
            let mut s = 0.0;
            for p in chunk {
                let r = p.coef_x * net.forward_cached(p.x, &mut at_x)
                    - p.coef_back * net.forward_cached(p.back, &mut at_back)
                    - p.source;
                s += r * r * p.measure;
                let seed = 2.0 * r * p.measure;
                net.backward_accumulate(&mut at_x, seed * p.coef_x, &mut grad);
                net.backward_accumulate(&mut at_back, -seed * p.coef_back, &mut grad);
            }
            (s, grad)
        });
        let boundary = map_chunks(&self.inflow, |chunk| {
            let mut ws = Workspace::new(arch);
            let mut grad = vec![0.0; n];
            let mut s = 0.0;
            for p in chunk {
                let e = net.forward_cached(p.x, &mut ws) - p.data;
                s += p.weight * e * e;
                net.backward_accumulate(&mut ws, alpha * 2.0 * p.weight * e, &mut grad);
            }
            (s, grad)
        });
        let combine = |mut a: (f64, Vec<f64>), b: (f64, Vec<f64>)| {
            a.0 += b.0;
            add_into(&mut a.1, &b.1);
            a
        };
        let (interior, mut grad) = tree_reduce(interior, combine).unwrap_or((0.0, vec![0.0; n]));
        let (boundary, grad_b) = tree_reduce(boundary, combine).unwrap_or((0.0, vec![0.0; n]));
        add_into(&mut grad, &grad_b);
        let value = self.finish(interior, boundary, net)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok((value, grad))
    }
}

/// Evaluates the discrete functional once.
pub fn discrete_loss(
    net: &Network,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    cfg: &LossConfig,
) -> Result<LossValue> {
    LeastSquares::new(mesh, problem, cfg)?.value(net)
}

/// Gradient of the discrete functional.
pub fn loss_gradient(
    net: &Network,
    mesh: &IntegrationMesh,
    problem: &BenchmarkProblem,
    cfg: &LossConfig,
) -> Result<Vec<f64>> {
    Ok(LeastSquares::new(mesh, problem, cfg)?.value_and_gradient(net)?.1)
}

/// The functional on a refined mesh of size `fine_h` with the same ρ, as a
/// quadrature approximation of the continuous functional.
pub fn continuous_loss(
    net: &Network,
    problem: &BenchmarkProblem,
    fine_h: f64,
    cfg: &LossConfig,
) -> Result<LossValue> {
    let mesh = IntegrationMesh::uniform(problem.domain, fine_h)?.with_inflow(&problem.beta);
    LeastSquares::for_evaluation(&mesh, problem, cfg)?.value(net)
}
