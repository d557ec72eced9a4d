//! Breaking lines: zero sets of hidden-neuron pre-activations inside the domain.
//!
//! First-layer neurons are affine in the input, so their zero sets are
//! straight lines clipped to the rectangle. Deeper neurons are piecewise
//! linear; their zero sets are traced by marching squares on a sampling grid.

use super::{Network, Workspace};
use crate::geometry::{Domain, Point};

/// Grid resolution (cells per side) used to contour deeper neurons.
pub const CONTOUR_GRID: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
}

/// Zero set of hidden neuron `neuron` in hidden layer `layer` (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct BreakingCurve {
    pub layer: usize,
    pub neuron: usize,
    pub segments: Vec<Segment>,
}

/// Clips the line `w·x = b` to the closed rectangle.
pub fn clip_line(w: Point, b: f64, d: &Domain) -> Option<Segment> {
    let mut pts: Vec<Point> = Vec::with_capacity(4);
    let tol = 1e-12 * (1.0 + d.diameter());
    if w[1] != 0.0 {
        for x in [d.x_lo, d.x_hi] {
            let y = (b - w[0] * x) / w[1];
            if y >= d.y_lo - tol && y <= d.y_hi + tol {
                pts.push([x, y.clamp(d.y_lo, d.y_hi)]);
            }
        }
    }
    if w[0] != 0.0 {
        for y in [d.y_lo, d.y_hi] {
            let x = (b - w[1] * y) / w[0];
            if x >= d.x_lo - tol && x <= d.x_hi + tol {
                pts.push([x.clamp(d.x_lo, d.x_hi), y]);
            }
        }
    }
    let mut best: Option<(f64, Segment)> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let len = (pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]);
            if len > tol && best.is_none_or(|(l, _)| len > l) {
                best = Some((len, Segment { start: pts[i], end: pts[j] }));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Marching-squares zero contour of `values` sampled on an `(n+1)×(n+1)` node grid.
fn contour(values: &[f64], n: usize, d: &Domain) -> Vec<Segment> {
    let hx = d.width() / n as f64;
    let hy = d.height() / n as f64;
    let node = |i: usize, j: usize| -> Point { [d.x_lo + i as f64 * hx, d.y_lo + j as f64 * hy] };
    let val = |i: usize, j: usize| values[j * (n + 1) + i];
    let lerp = |p: Point, q: Point, a: f64, b: f64| -> Point {
        let t = a / (a - b);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    };
    let mut segs = Vec::new();
    for j in 0..n {
        for i in 0..n {
            // corners counter-clockwise from bottom-left
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let v: Vec<f64> = c.iter().map(|&(a, b)| val(a, b)).collect();
            let mut crossings: Vec<Point> = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (v[e], v[(e + 1) % 4]);
                if (a > 0.0) != (b > 0.0) {
                    let (p, q) = (node(c[e].0, c[e].1), node(c[(e + 1) % 4].0, c[(e + 1) % 4].1));
                    crossings.push(lerp(p, q, a, b));
                }
            }
            match crossings.len() {
                2 => segs.push(Segment { start: crossings[0], end: crossings[1] }),
                4 => {
                    // saddle: pair by the sign of the cell-centre average
                    let centre = v.iter().sum::<f64>() / 4.0;
                    if (centre > 0.0) == (v[0] > 0.0) {
                        segs.push(Segment { start: crossings[0], end: crossings[3] });
                        segs.push(Segment { start: crossings[1], end: crossings[2] });
                    } else {
                        segs.push(Segment { start: crossings[0], end: crossings[1] });
                        segs.push(Segment { start: crossings[2], end: crossings[3] });
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

/// Breaking curves of every hidden neuron, first layer first.
pub fn breaking_lines(net: &Network, domain: &Domain) -> Vec<BreakingCurve> {
    let mut out = Vec::new();
    let (_, n1) = net.layer_shape(0);
    for i in 0..n1 {
        let r = net.row(0, i);
        let segments = clip_line([r[0], r[1]], r[2], domain).into_iter().collect();
        out.push(BreakingCurve { layer: 1, neuron: i, segments });
    }
    let hidden = net.arch().depth() - 1;
    if hidden < 2 {
        return out;
    }
    let n = CONTOUR_GRID;
    let mut ws = Workspace::new(net.arch());
    // pre-activations of deeper layers at every grid node
    let mut samples: Vec<Vec<Vec<f64>>> = (1..hidden)
        .map(|k| vec![Vec::with_capacity((n + 1) * (n + 1)); net.layer_shape(k).1])
        .collect();
    for j in 0..=n {
        for i in 0..=n {
            let x = [
                domain.x_lo + i as f64 * domain.width() / n as f64,
                domain.y_lo + j as f64 * domain.height() / n as f64,
            ];
            net.forward_cached(x, &mut ws);
            for (k, layer) in samples.iter_mut().enumerate() {
                for (neuron, buf) in layer.iter_mut().enumerate() {
                    buf.push(ws.pre[k + 1][neuron]);
                }
            }
        }
    }
    for (k, layer) in samples.iter().enumerate() {
        for (neuron, vals) in layer.iter().enumerate() {
            out.push(BreakingCurve { layer: k + 2, neuron, segments: contour(vals, n, domain) });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{construct_lemma32, Architecture, RampSpec};
    use std::f64::consts::FRAC_PI_3;

    fn vline_domain() -> Domain {
        Domain::new(0.0, 2.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn vertical_line_is_clipped() {
        let s = clip_line([1.0, 0.0], 1.02882, &vline_domain()).unwrap();
        let (lo, hi) = if s.start[1] < s.end[1] { (s.start, s.end) } else { (s.end, s.start) };
        assert_eq!(lo, [1.02882, 0.0]);
        assert_eq!(hi, [1.02882, 1.0]);
    }

    #[test]
    fn line_missing_domain_is_empty() {
        assert!(clip_line([0.0, 1.0], 2.0, &Domain::unit_square()).is_none());
        assert!(clip_line([0.0, 0.0], 0.0, &Domain::unit_square()).is_none());
    }

    #[test]
    fn diagonal_through_corners() {
        let s = clip_line([1.0, -1.0], 0.0, &Domain::unit_square()).unwrap();
        let len = (s.start[0] - s.end[0]).hypot(s.start[1] - s.end[1]);
        assert!((len - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ramp_network_has_two_vertical_lines() {
        let eps = 0.1;
        let net = construct_lemma32(&RampSpec {
            xi: [1.0, 0.0],
            c: FRAC_PI_3,
            alpha1: 0.0,
            alpha2: 1.0,
            eps,
        })
        .unwrap();
        let curves = breaking_lines(&net, &vline_domain());
        assert_eq!(curves.len(), 2);
        let xs: Vec<f64> = curves.iter().map(|c| c.segments[0].start[0]).collect();
        assert!((xs[0] - (FRAC_PI_3 - eps)).abs() < 1e-12);
        assert!((xs[1] - (FRAC_PI_3 + eps)).abs() < 1e-12);
    }

    #[test]
    fn deep_neuron_contour_follows_its_zero_set() {
        // layer 2 neuron: σ(x) + σ(y) − 0.5 has zero set x + y = 0.5 on the unit square
        let mut net = Network::zeros(Architecture::new(vec![2, 2, 1, 1]).unwrap());
        net.row_mut(0, 0).copy_from_slice(&[1.0, 0.0, 0.0]);
        net.row_mut(0, 1).copy_from_slice(&[0.0, 1.0, 0.0]);
        net.row_mut(1, 0).copy_from_slice(&[1.0, 1.0, 0.5]);
        net.row_mut(2, 0).copy_from_slice(&[1.0, 0.0]);
        let curves = breaking_lines(&net, &Domain::unit_square());
        let deep = curves.iter().find(|c| c.layer == 2).unwrap();
        assert!(!deep.segments.is_empty());
        for s in &deep.segments {
            for p in [s.start, s.end] {
                assert!((p[0] + p[1] - 0.5).abs() < 1e-9);
            }
        }
    }
}
