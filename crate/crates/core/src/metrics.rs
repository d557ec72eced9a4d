//! Error norms, cross sections and overshoot.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Domain, IntegrationMesh, Point};
use crate::loss::{LeastSquares, LossConfig};
use crate::network::Network;
use crate::problems::BenchmarkProblem;
use crate::reduce::{map_chunks, tree_reduce};

/// The three relative errors reported per run, plus the parameter count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics {
    /// `‖u − ū‖₀ / ‖u‖₀`
    pub rel_l2: f64,
    /// `⦀u − ū⦀_β / ⦀u⦀_β` with `⦀v⦀_β² = ‖v‖₀² + ‖v_β‖₀²`
    pub rel_vbeta: f64,
    /// `√(L(ū; f) / L(ū; 0))`
    pub loss_ratio: f64,
    pub param_count_paper: usize,
}

/// Computes all metrics against the problem's exact solution.
///
/// `ū_β` uses the same backward difference as training; the loss ratio uses
/// inflow weight 1 whatever `cfg.boundary_weight` is.
pub fn error_metrics(
    net: &Network,
    problem: &BenchmarkProblem,
    mesh: &IntegrationMesh,
    cfg: &LossConfig,
) -> Result<ErrorMetrics> {
    let (rel_l2, rel_vbeta) = relative_errors(net, problem, mesh, cfg, &|x| problem.exact(x), &|x| problem.exact_beta(x))?;
    let ls = LeastSquares::for_evaluation(mesh, problem, cfg)?.with_boundary_weight(1.0);
    let num = ls.value(net)?.total;
    let den = ls.homogeneous().value(net)?.total;
    let loss_ratio = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        return Err(Error::Numeric("loss ratio denominator L(ū; 0) is zero".into()));
    };
    Ok(ErrorMetrics { rel_l2, rel_vbeta, loss_ratio, param_count_paper: net.arch().paper_param_count() })
}

/// `(‖u − ū‖₀/‖u‖₀, ⦀u − ū⦀_β/⦀u⦀_β)` for an arbitrary reference `u` with
/// derivative `u_β` along `problem.beta`.
pub fn relative_errors(
    net: &Network,
    problem: &BenchmarkProblem,
    mesh: &IntegrationMesh,
    cfg: &LossConfig,
    exact: &(dyn Fn(Point) -> f64 + Sync),
    exact_beta: &(dyn Fn(Point) -> f64 + Sync),
) -> Result<(f64, f64)> {
    let rho = cfg.rho;
    let parts = map_chunks(&mesh.cells, |chunk| {
        let mut s = [0.0; 4];
        for c in chunk {
            let x = c.centroid;
            let u = exact(x);
            let v = net.forward(x);
            let (approx_beta, ub) = match problem.beta.unit(x) {
                Ok(unit) => {
                    let speed = if cfg.scale_by_speed { problem.beta.speed(x) } else { 1.0 };
                    let back = [x[0] - rho * unit[0], x[1] - rho * unit[1]];
                    (speed * (v - net.forward(back)) / rho, exact_beta(x))
                }
                Err(_) => (0.0, 0.0),
            };
            s[0] += (u - v).powi(2) * c.measure;
            s[1] += u * u * c.measure;
            s[2] += (ub - approx_beta).powi(2) * c.measure;
            s[3] += ub * ub * c.measure;
        }
        s
    });
    let s = tree_reduce(parts, |mut a, b| {
        for i in 0..4 {
            a[i] += b[i];
        }
        a
    })
    .unwrap_or([0.0; 4]);
    if !(s[1] > 0.0) {
        return Err(Error::Numeric("reference solution has zero L2 norm".into()));
    }
    let rel_l2 = (s[0] / s[1]).sqrt();
    let rel_vbeta = ((s[0] + s[2]) / (s[1] + s[3])).sqrt();
    if !rel_l2.is_finite() || !rel_vbeta.is_finite() {
        return Err(Error::Numeric("non-finite error norm".into()));
    }
    Ok((rel_l2, rel_vbeta))
}

/// A straight line `lhs = c + m·other`, written as `x=c`, `y=c`, `y=-x`,
/// `y=1-x`, `x=0.5*y+0.25`, and so on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSpec {
    /// A point on the line.
    pub point: Point,
    /// Unit direction; sections run along it.
    pub direction: Point,
    text_lhs_is_x: bool,
    slope: f64,
    intercept: f64,
}

impl LineSpec {
    fn from_parts(lhs_is_x: bool, slope: f64, intercept: f64) -> Self {
        let (point, dir) = if lhs_is_x {
            ([intercept, 0.0], [slope, 1.0])
        } else {
            ([0.0, intercept], [1.0, slope])
        };
        let n = dir[0].hypot(dir[1]);
        Self { point, direction: [dir[0] / n, dir[1] / n], text_lhs_is_x: lhs_is_x, slope, intercept }
    }

    /// The part of the line inside the closed rectangle, as parameters
    /// `(t_in, t_out)` along `direction` from `point`.
    pub fn clip(&self, d: &Domain) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for (p, v, a, b) in [
            (self.point[0], self.direction[0], d.x_lo, d.x_hi),
            (self.point[1], self.direction[1], d.y_lo, d.y_hi),
        ] {
            if v.abs() < 1e-15 {
                if p < a - 1e-12 || p > b + 1e-12 {
                    return None;
                }
            } else {
                let (t1, t2) = ((a - p) / v, (b - p) / v);
                lo = lo.max(t1.min(t2));
                hi = hi.min(t1.max(t2));
            }
        }
        (hi >= lo).then_some((lo, hi))
    }

    pub fn at(&self, t: f64) -> Point {
        [self.point[0] + t * self.direction[0], self.point[1] + t * self.direction[1]]
    }
}

impl fmt::Display for LineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lhs, rhs) = if self.text_lhs_is_x { ("x", "y") } else { ("y", "x") };
        let (m, c) = (self.slope, self.intercept);
        if m == 0.0 {
            write!(f, "{lhs}={c}")
        } else if c == 0.0 {
            write!(f, "{lhs}={m}*{rhs}")
        } else {
            write!(f, "{lhs}={c}{}{}*{rhs}", if m < 0.0 { "-" } else { "+" }, m.abs())
        }
    }
}

impl FromStr for LineSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse line `{s}`; expected e.g. `y=1`, `x=0`, `y=-x`, `y=1-x`"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (lhs, rhs) = compact.split_once('=').ok_or_else(bad)?;
        let (lhs_is_x, var) = match lhs {
            "x" => (true, 'y'),
            "y" => (false, 'x'),
            _ => return Err(bad()),
        };
        if rhs.is_empty() {
            return Err(bad());
        }
        // split into signed terms
        let mut terms = Vec::new();
        let mut start = 0;
        for (i, ch) in rhs.char_indices() {
            if (ch == '+' || ch == '-') && i > 0 && !rhs[..i].ends_with(['e', 'E']) {
                terms.push(&rhs[start..i]);
                start = i;
            }
        }
        terms.push(&rhs[start..]);
        let (mut slope, mut intercept) = (0.0, 0.0);
        for term in terms {
            let (sign, body) = match term.strip_prefix('-') {
                Some(b) => (-1.0, b),
                None => (1.0, term.strip_prefix('+').unwrap_or(term)),
            };
            if let Some(coef) = body.strip_suffix(var) {
                let coef = coef.strip_suffix('*').unwrap_or(coef);
                let m = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().map_err(|_| bad())? };
                slope += sign * m;
            } else {
                intercept += sign * body.parse::<f64>().map_err(|_| bad())?;
            }
        }
        Ok(Self::from_parts(lhs_is_x, slope, intercept))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectionSample {
    /// Arc length from the entry point of the line into the domain.
    pub t: f64,
    pub x: Point,
    pub exact: f64,
    pub approx: f64,
}

/// Samples exact and network values uniformly along the line inside the
/// domain. Exact values are taken pointwise, so jumps are never averaged.
pub fn cross_section(
    net: &Network,
    problem: &BenchmarkProblem,
    line: &LineSpec,
    samples: usize,
) -> Result<Vec<SectionSample>> {
    let (t0, t1) = line
        .clip(&problem.domain)
        .ok_or_else(|| Error::config("line", format!("`{line}` does not meet the domain")))?;
    let n = samples.max(2);
    Ok((0..n)
        .map(|i| {
            let s = (t1 - t0) * i as f64 / (n - 1) as f64;
            let x = line.at(t0 + s);
            SectionSample { t: s, x, exact: problem.exact(x), approx: net.forward(x) }
        })
        .collect())
}

/// `max(0, max ū − max u) + max(0, min u − min ū)` over the section.
pub fn overshoot_measure(section: &[SectionSample]) -> f64 {
    let max = |f: fn(&SectionSample) -> f64| section.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let min = |f: fn(&SectionSample) -> f64| section.iter().map(f).fold(f64::INFINITY, f64::min);
    if section.is_empty() {
        return 0.0;
    }
    (max(|s| s.approx) - max(|s| s.exact)).max(0.0) + (min(|s| s.exact) - min(|s| s.approx)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{construct_lemma32, RampSpec};
    use crate::problems::{builtin_problem, INTERFACE_RADIUS};
    use std::f64::consts::FRAC_PI_3;

    fn mesh_for(p: &BenchmarkProblem, h: f64) -> IntegrationMesh {
        IntegrationMesh::uniform(p.domain, h).unwrap().with_inflow(&p.beta)
    }

    #[test]
    fn zero_network_has_unit_error() {
        let p = builtin_problem("vline").unwrap();
        let mesh = mesh_for(&p, 0.01);
        let cfg = LossConfig::for_problem(&p, 0.01);
        let zero = Network::zeros("2-4-1".parse().unwrap());
        let (l2, vb) = relative_errors(&zero, &p, &mesh, &cfg, &|x| p.exact(x), &|x| p.exact_beta(x)).unwrap();
        assert!((l2 - 1.0).abs() < 1e-14);
        assert!((vb - 1.0).abs() < 1e-14);
        // L(0; 0) = 0: the loss ratio is undefined and flagged
        assert!(error_metrics(&zero, &p, &mesh, &cfg).is_err());
    }

    #[test]
    fn ramp_error_matches_lemma_value() {
        // ‖χ − p‖₀ = √(ε/6) for the ramp of width 2ε; ‖u‖₀ = √2
        let p = builtin_problem("vline").unwrap();
        let mesh = mesh_for(&p, 0.001);
        let cfg = LossConfig::for_problem(&p, 0.001);
        for eps in [0.1, 0.05] {
            let net = construct_lemma32(&RampSpec { xi: [1.0, 0.0], c: FRAC_PI_3, alpha1: 0.0, alpha2: 1.0, eps }).unwrap();
            let m = error_metrics(&net, &p, &mesh, &cfg).unwrap();
            let norm = (2.0 - FRAC_PI_3).sqrt();
            let want = (eps / 6.0).sqrt() / norm;
            assert!((m.rel_l2 - want).abs() <= 1e-2 * want, "{} vs {want}", m.rel_l2);
        }
    }

    #[test]
    fn parse_lines() {
        let l: LineSpec = "y=1".parse().unwrap();
        assert_eq!(l.point, [0.0, 1.0]);
        assert_eq!(l.direction, [1.0, 0.0]);
        let l: LineSpec = "x = 0".parse().unwrap();
        assert_eq!(l.direction, [0.0, 1.0]);
        let l: LineSpec = "y=-x".parse().unwrap();
        assert!((l.direction[0] + l.direction[1]).abs() < 1e-15);
        let l: LineSpec = "y=1-x".parse().unwrap();
        assert_eq!(l.point, [0.0, 1.0]);
        let l: LineSpec = "x=0.5*y+0.25".parse().unwrap();
        assert_eq!(l.point, [0.25, 0.0]);
        let l: LineSpec = "y=1e-3+2x".parse().unwrap();
        assert_eq!(l.point, [0.0, 1e-3]);
        for s in ["y=1", "x=0", "y=-1*x", "y=1-1*x", "x=0.25+0.5*y"] {
            let l: LineSpec = s.parse().unwrap();
            assert_eq!(l.to_string().parse::<LineSpec>().unwrap(), l, "{s}");
        }
        for bad in ["", "z=1", "y=", "y=abc", "x=2z"] {
            assert!(bad.parse::<LineSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn vline_section_is_a_step() {
        let p = builtin_problem("vline").unwrap();
        let net = Network::zeros("2-4-1".parse().unwrap());
        let s = cross_section(&net, &p, &"y=1".parse().unwrap(), 401).unwrap();
        assert_eq!(s.len(), 401);
        assert!((s[400].t - 2.0).abs() < 1e-15);
        for v in &s {
            assert_eq!(v.exact, if v.x[0] < FRAC_PI_3 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn diagonal_section_steps_at_origin() {
        let p = builtin_problem("diagonal").unwrap();
        let net = Network::zeros("2-4-1".parse().unwrap());
        let s = cross_section(&net, &p, &"y=-x".parse().unwrap(), 400).unwrap();
        let first = s.iter().position(|v| v.exact != s[0].exact).unwrap();
        assert!(s[first - 1].x[0] < 0.0 && s[first].x[0] > 0.0);
        assert!(s[first..].iter().all(|v| v.exact == s[first].exact));
    }

    #[test]
    fn rotational_section_steps_at_radius() {
        let p = builtin_problem("rotational").unwrap();
        let net = Network::zeros("2-4-1".parse().unwrap());
        let s = cross_section(&net, &p, &"x=0".parse().unwrap(), 1001).unwrap();
        for v in &s {
            let want = if v.x[1] < INTERFACE_RADIUS { -1.0 } else { 1.0 };
            assert_eq!(v.exact, want, "at y = {}", v.x[1]);
        }
    }

    #[test]
    fn line_missing_domain() {
        let p = builtin_problem("vline").unwrap();
        let net = Network::zeros("2-4-1".parse().unwrap());
        assert!(cross_section(&net, &p, &"y=3".parse().unwrap(), 10).is_err());
    }

    #[test]
    fn overshoot_examples() {
        let step: Vec<SectionSample> = (0..11)
            .map(|i| {
                let e = if i < 5 { 0.0 } else { 1.0 };
                SectionSample { t: i as f64, x: [0.0, 0.0], exact: e, approx: e }
            })
            .collect();
        assert_eq!(overshoot_measure(&step), 0.0);
        let mut spiked = step.clone();
        spiked[7].approx = 1.2;
        assert!((overshoot_measure(&spiked) - 0.2).abs() < 1e-15);
        spiked[2].approx = -0.1;
        assert!((overshoot_measure(&spiked) - 0.3).abs() < 1e-15);
    }
}
