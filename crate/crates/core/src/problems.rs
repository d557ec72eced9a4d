//! Benchmark advection-reaction problems with known discontinuous solutions.
//!
//! | id           | Ω              | β                 | γ̂ | interface                      |
//! |--------------|----------------|-------------------|----|--------------------------------|
//! | `vline`      | (0,2)×(0,1)    | (0,1)             | 0  | x = π/3                        |
//! | `diagonal`   | (−1,1)²        | (1,1)/√2          | 1  | y = x                          |
//! | `smooth`     | (0,1)²         | (1,1)/√2          | 0  | y = x (piecewise smooth jump)  |
//! | `twojump`    | (−1,1)×(0,1)   | (1,1)/√2          | 1  | y = x + 0.2, y = x − 0.1       |
//! | `twosector`  | (0,1)²         | two-sector        | 0  | two chords of radius a = 43/64 |
//! | `rotational` | (0,1)²         | (−y, x)           | 0  | circle x² + y² = a²            |
//! | `sectors:n`  | (0,1)²         | n-sector chords   | 0  | n chords of radius a           |
//!
//! Every exact solution is constant along streamlines, so `u_β = 0` off the
//! interfaces. Points lying exactly on an interface take the value of the
//! region described by the non-strict inequality in the code below.

use std::f64::consts::{FRAC_PI_3, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::velocity::{sector_angle, sector_index, VelocityField};

/// Radius of the circular interface and end of the `−1` inflow segment.
pub const INTERFACE_RADIUS: f64 = 43.0 / 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    VLine,
    Diagonal,
    Smooth,
    TwoJump,
    TwoSector,
    Rotational,
    /// Rotational inflow data with the `n`-sector field.
    Sectors(usize),
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::VLine => f.write_str("vline"),
            Self::Diagonal => f.write_str("diagonal"),
            Self::Smooth => f.write_str("smooth"),
            Self::TwoJump => f.write_str("twojump"),
            Self::TwoSector => f.write_str("twosector"),
            Self::Rotational => f.write_str("rotational"),
            Self::Sectors(n) => write!(f, "sectors:{n}"),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "vline" => Self::VLine,
            "diagonal" => Self::Diagonal,
            "smooth" => Self::Smooth,
            "twojump" => Self::TwoJump,
            "twosector" => Self::TwoSector,
            "rotational" => Self::Rotational,
            other => match other.strip_prefix("sectors:").map(|n| n.parse::<usize>()) {
                Some(Ok(n)) if n >= 2 => Self::Sectors(n),
                _ => return Err(Error::config("problem", format!("unknown problem id `{other}`"))),
            },
        })
    }
}

/// A fully specified problem: geometry, coefficients, data, exact solution.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkProblem {
    pub kind: ProblemKind,
    pub domain: Domain,
    pub beta: VelocityField,
    gamma_hat: f64,
    /// Inflow weight α used by default when training this problem.
    pub default_boundary_weight: f64,
    /// Default FD offset as a fraction of h.
    pub default_rho_fraction: f64,
    /// Default cross-section line, in [`crate::metrics::LineSpec`] syntax.
    pub default_section: &'static str,
}

fn diag() -> VelocityField {
    VelocityField::Constant([1.0 / SQRT_2, 1.0 / SQRT_2])
}

impl BenchmarkProblem {
    pub fn new(kind: ProblemKind) -> Self {
        let unit = Domain::unit_square();
        let (domain, beta, gamma_hat, alpha, rho, section) = match kind {
            ProblemKind::VLine => (
                Domain { x_lo: 0.0, x_hi: 2.0, y_lo: 0.0, y_hi: 1.0 },
                VelocityField::Constant([0.0, 1.0]),
                0.0,
                1.0,
                0.5,
                "y=1",
            ),
            ProblemKind::Diagonal => (
                Domain { x_lo: -1.0, x_hi: 1.0, y_lo: -1.0, y_hi: 1.0 },
                diag(),
                1.0,
                1.0,
                0.5,
                "y=-x",
            ),
            ProblemKind::Smooth => (unit, diag(), 0.0, 1.0, 0.5, "y=1-x"),
            ProblemKind::TwoJump => (
                Domain { x_lo: -1.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 },
                diag(),
                1.0,
                10.0,
                0.5,
                "y=0.8",
            ),
            ProblemKind::TwoSector => (unit, VelocityField::TwoSectorDiagonal, 0.0, 1.0, 0.5, "x=0"),
            ProblemKind::Rotational => (unit, VelocityField::Rotational, 0.0, 1.0, 0.1, "x=0"),
            ProblemKind::Sectors(n) => (unit, VelocityField::SectorApprox(n), 0.0, 1.0, 0.5, "x=0"),
        };
        Self {
            kind,
            domain,
            beta,
            gamma_hat,
            default_boundary_weight: alpha,
            default_rho_fraction: rho,
            default_section: section,
        }
    }

    pub fn id(&self) -> String {
        self.kind.to_string()
    }

    /// γ̂ = γ + ∇·β; every shipped field is divergence-free, so γ̂ = γ.
    pub fn gamma_hat(&self, _x: Point) -> f64 {
        self.gamma_hat
    }

    pub fn source(&self, x: Point) -> f64 {
        match self.kind {
            ProblemKind::Diagonal | ProblemKind::TwoJump => self.exact(x),
            _ => 0.0,
        }
    }

    /// Inflow data; meaningful on Γ₋ only.
    pub fn inflow(&self, x: Point) -> f64 {
        let [px, py] = x;
        match self.kind {
            ProblemKind::VLine => {
                if px < FRAC_PI_3 {
                    0.0
                } else {
                    1.0
                }
            }
            ProblemKind::Diagonal => {
                if px == self.domain.x_lo && py > self.domain.y_lo {
                    1.0
                } else {
                    0.0
                }
            }
            ProblemKind::Smooth => {
                if px == 0.0 {
                    py.sin()
                } else {
                    px.cos()
                }
            }
            ProblemKind::TwoJump => two_jump_profile(px - py),
            ProblemKind::TwoSector | ProblemKind::Rotational | ProblemKind::Sectors(_) => {
                if py == 0.0 && px < INTERFACE_RADIUS {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }

    pub fn exact(&self, x: Point) -> f64 {
        let [px, py] = x;
        let a = INTERFACE_RADIUS;
        match self.kind {
            ProblemKind::VLine => {
                if px < FRAC_PI_3 {
                    0.0
                } else {
                    1.0
                }
            }
            ProblemKind::Diagonal => {
                if py > px {
                    1.0
                } else {
                    0.0
                }
            }
            ProblemKind::Smooth => {
                if py > px {
                    (py - px).sin()
                } else {
                    (px - py).cos()
                }
            }
            ProblemKind::TwoJump => two_jump_profile(px - py),
            ProblemKind::TwoSector => {
                let inside = if py < px {
                    px + (SQRT_2 - 1.0) * py < a
                } else {
                    (SQRT_2 - 1.0) * px + py < a
                };
                if inside {
                    -1.0
                } else {
                    1.0
                }
            }
            ProblemKind::Rotational => {
                if px * px + py * py < a * a {
                    -1.0
                } else {
                    1.0
                }
            }
            ProblemKind::Sectors(n) => exact_solution_sectors(n, a, x),
        }
    }

    /// Exact directional derivative `β·∇u`, zero off interfaces for every benchmark.
    pub fn exact_beta(&self, _x: Point) -> f64 {
        0.0
    }

    /// Distance from `x` to the nearest discontinuity of the exact solution.
    pub fn interface_distance(&self, x: Point) -> f64 {
        let [px, py] = x;
        let a = INTERFACE_RADIUS;
        match self.kind {
            ProblemKind::VLine => (px - FRAC_PI_3).abs(),
            ProblemKind::Diagonal | ProblemKind::Smooth => (py - px).abs() / SQRT_2,
            ProblemKind::TwoJump => {
                let s = px - py;
                (s + 0.2).abs().min((s - 0.1).abs()) / SQRT_2
            }
            ProblemKind::TwoSector => polygon_distance(2, a, x),
            ProblemKind::Rotational => (px.hypot(py) - a).abs(),
            ProblemKind::Sectors(n) => polygon_distance(n, a, x),
        }
    }
}

/// Inflow profile of `twojump` as a function of `s = x − y`.
fn two_jump_profile(s: f64) -> f64 {
    if -0.9 < s && s < -0.6 {
        (PI * (s + 0.9) / 0.3).sin()
    } else if -0.2 < s && s < 0.1 {
        -1.0
    } else {
        0.0
    }
}

/// Exact solution for the `n`-sector field with inflow jump at `(a, 0)`:
/// `−1` inside the polygon of chords of the circle of radius `a` at the
/// sector angles, `+1` outside.
pub fn exact_solution_sectors(n: usize, a: f64, x: Point) -> f64 {
    let i = sector_index(n, x);
    let mid = 0.5 * (sector_angle(n, i) + sector_angle(n, i + 1));
    let half = 0.5 * (sector_angle(n, 1) - sector_angle(n, 0));
    if mid.cos() * x[0] + mid.sin() * x[1] < a * half.cos() {
        -1.0
    } else {
        1.0
    }
}

/// Vertices `a(cos t_i, sin t_i)` of the chord polygon.
pub fn chord_vertices(n: usize, a: f64) -> Vec<Point> {
    (0..=n)
        .map(|i| {
            let t = sector_angle(n, i);
            [a * t.cos(), a * t.sin()]
        })
        .collect()
}

fn polygon_distance(n: usize, a: f64, x: Point) -> f64 {
    chord_vertices(n, a)
        .windows(2)
        .map(|w| segment_distance(w[0], w[1], x))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(p: Point, q: Point, x: Point) -> f64 {
    let d = [q[0] - p[0], q[1] - p[1]];
    let t = (((x[0] - p[0]) * d[0] + (x[1] - p[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1])).clamp(0.0, 1.0);
    (x[0] - p[0] - t * d[0]).hypot(x[1] - p[1] - t * d[1])
}

/// Looks up a built-in problem by id.
pub fn builtin_problem(id: &str) -> Result<BenchmarkProblem> {
    Ok(BenchmarkProblem::new(id.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::IntegrationMesh;
    use crate::loss::fd_directional_derivative;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [&str; 9] = [
        "vline", "diagonal", "smooth", "twojump", "twosector", "rotational", "sectors:3", "sectors:4", "sectors:5",
    ];

    fn random_point(d: &Domain, rng: &mut ChaCha8Rng) -> Point {
        [rng.gen_range(d.x_lo..d.x_hi), rng.gen_range(d.y_lo..d.y_hi)]
    }

    #[test]
    fn pointwise_values() {
        assert_eq!(builtin_problem("vline").unwrap().exact([1.5, 0.5]), 1.0);
        assert_eq!(builtin_problem("rotational").unwrap().exact([0.3, 0.3]), -1.0);
        let tj = builtin_problem("twojump").unwrap();
        assert!((tj.exact([-0.6, 0.15]) - 1.0).abs() < 1e-12);
        assert_eq!(tj.exact([0.0, 0.1]), -1.0);
        assert_eq!(tj.exact([0.5, 0.1]), 0.0);
        let d = builtin_problem("diagonal").unwrap();
        assert_eq!(d.source([0.0, 0.5]), 1.0);
        assert_eq!(d.source([0.5, 0.0]), 0.0);
        assert_eq!(d.gamma_hat([0.0, 0.0]), 1.0);
        assert_eq!(tj.default_boundary_weight, 10.0);
        assert!(builtin_problem("nope").is_err());
        assert!(builtin_problem("sectors:1").is_err());
    }

    #[test]
    fn sector_solution_examples() {
        let a = INTERFACE_RADIUS;
        assert_eq!(exact_solution_sectors(2, a, [0.1, 0.1]), -1.0);
        for n in 2..8 {
            assert_eq!(exact_solution_sectors(n, a, [0.99, 0.99]), 1.0);
        }
        // chord midpoints, pushed slightly inward and outward
        let n = 4;
        let v = chord_vertices(n, a);
        for w in v.windows(2) {
            let m = [(w[0][0] + w[1][0]) / 2.0, (w[0][1] + w[1][1]) / 2.0];
            let r = m[0].hypot(m[1]);
            let inward = [m[0] * (1.0 - 1e-6 / r), m[1] * (1.0 - 1e-6 / r)];
            let outward = [m[0] * (1.0 + 1e-6 / r), m[1] * (1.0 + 1e-6 / r)];
            assert_eq!(exact_solution_sectors(n, a, inward), -1.0);
            assert_eq!(exact_solution_sectors(n, a, outward), 1.0);
        }
    }

    #[test]
    fn two_sectors_agree_with_twosector_problem() {
        let p = builtin_problem("twosector").unwrap();
        let s = builtin_problem("sectors:2").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let x = random_point(&p.domain, &mut rng);
            if p.interface_distance(x) < 1e-12 {
                continue;
            }
            assert_eq!(p.exact(x), s.exact(x), "{x:?}");
        }
        // the inflow jump (a, 0) lies on both interfaces
        assert!(p.interface_distance([INTERFACE_RADIUS, 0.0]) < 1e-15);
        assert!(builtin_problem("rotational").unwrap().interface_distance([INTERFACE_RADIUS, 0.0]) < 1e-15);
    }

    #[test]
    fn exact_solutions_satisfy_the_pde() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for id in ALL {
            let p = builtin_problem(id).unwrap();
            let rho = 1e-3;
            let mut checked = 0;
            while checked < 1_000 {
                let x = random_point(&p.domain, &mut rng);
                if p.interface_distance(x) <= 2.0 * rho {
                    continue;
                }
                let unit = p.beta.unit(x).unwrap();
                let fd = fd_directional_derivative(|q| p.exact(q), x, unit, rho);
                // smooth solutions are constant along β, so the quotient is
                // exact up to rounding
                assert!(fd.abs() <= 1e-10, "{id}: fd {fd} at {x:?}");
                let residual = p.exact_beta(x) + p.gamma_hat(x) * p.exact(x) - p.source(x);
                assert!(residual.abs() <= 1e-10, "{id}: residual {residual}");
                checked += 1;
            }
        }
    }

    #[test]
    fn inflow_data_matches_exact_solution() {
        for id in ALL {
            let p = builtin_problem(id).unwrap();
            let mesh = IntegrationMesh::uniform(p.domain, 0.01).unwrap().with_inflow(&p.beta);
            assert!(!mesh.inflow_edges.is_empty());
            for e in &mesh.inflow_edges {
                if p.interface_distance(e.centroid) < 1e-9 {
                    continue;
                }
                assert_eq!(p.inflow(e.centroid), p.exact(e.centroid), "{id} at {:?}", e.centroid);
            }
        }
    }

    #[test]
    fn chord_polygon_tends_to_circle() {
        // fine-grid count of the symmetric difference with the quarter disc
        let a = INTERFACE_RADIUS;
        let m = 1000;
        let areas: Vec<f64> = [2, 4, 8, 16]
            .iter()
            .map(|&n| {
                let mut count = 0usize;
                for j in 0..m {
                    for i in 0..m {
                        let x = [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64];
                        let disc = x[0] * x[0] + x[1] * x[1] < a * a;
                        let poly = exact_solution_sectors(n, a, x) < 0.0;
                        count += usize::from(disc != poly);
                    }
                }
                count as f64 / (m * m) as f64
            })
            .collect();
        for w in areas.windows(2) {
            assert!(w[1] < w[0], "{areas:?}");
        }
    }

    #[test]
    fn ids_round_trip() {
        for id in ALL {
            assert_eq!(builtin_problem(id).unwrap().id(), id);
        }
    }
}
