//! Fully connected ReLU networks with scalar output.
//!
//! Layer `l` maps `a ↦ σ(W a − b)`; the output layer is affine (`W a − b`)
//! with no activation. Note the bias is subtracted everywhere, including in
//! checkpoints.
//!
//! All parameters live in one flat vector, layer by layer; within a layer,
//! neuron by neuron as `[w_1, …, w_{n_in}, b]`. The flat vector is what the
//! optimizer updates and what [`Network::grad_params`] differentiates.

mod breaking;
mod checkpoint;
mod construct;

pub use breaking::{breaking_lines, BreakingCurve, Segment};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use construct::{construct_lemma32, construct_lemma51, max_gadget, RampSpec, TwoRampSpec};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point;

#[inline]
pub fn relu(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// σ'(t), with σ'(0) = 0.
#[inline]
pub fn relu_slope(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Layer widths `[n_0, n_1, …, n_L]`, written `2-4-1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 3 {
            return Err(Error::config("arch", "need an input, at least one hidden layer and an output"));
        }
        if widths.contains(&0) {
            return Err(Error::config("arch", "all layer widths must be >= 1"));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::config("arch", "output width must be 1"));
        }
        Ok(Self { widths })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Number of affine layers `L` (hidden layers plus output).
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// `Σ n_l (n_{l−1} + 1)`: the length of the flat parameter vector.
    pub fn raw_param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Parameter count with first-layer weights on the unit sphere: each
    /// first-layer neuron has `d − 1` direction parameters plus its bias.
    pub fn paper_param_count(&self) -> usize {
        let first = self.widths[1] * self.widths[0];
        first
            + self.widths[1..]
                .windows(2)
                .map(|w| w[1] * (w[0] + 1))
                .sum::<usize>()
    }

    /// True when every width of `self` is <= the matching width of `other`.
    pub fn embeds_into(&self, other: &Architecture) -> bool {
        self.widths.len() == other.widths.len()
            && self.widths[0] == other.widths[0]
            && self.widths.iter().zip(&other.widths).all(|(a, b)| a <= b)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.widths.iter().map(|w| w.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

impl FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let widths = s
            .trim()
            .split('-')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse(format!("bad architecture `{s}`")))?;
        Self::new(widths)
    }
}

/// Per-point buffers for a forward pass that can be back-propagated.
#[derive(Clone, Debug)]
pub struct Workspace {
    /// Activations `a_0 = x, a_1, …, a_{L−1}`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl Workspace {
    pub fn new(arch: &Architecture) -> Self {
        let w = arch.widths();
        let max = *w.iter().max().unwrap();
        Self {
            acts: w[..w.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            pre: w[1..w.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            delta: Vec::with_capacity(max),
            delta_next: Vec::with_capacity(max),
        }
    }

    /// Hidden pre-activations from the last forward pass.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// A ReLU network: architecture plus flat parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    arch: Architecture,
    params: Vec<f64>,
    offsets: Vec<usize>,
}

impl Network {
    pub fn zeros(arch: Architecture) -> Self {
        let mut offsets = Vec::with_capacity(arch.depth() + 1);
        let mut acc = 0;
        for w in arch.widths().windows(2) {
            offsets.push(acc);
            acc += w[1] * (w[0] + 1);
        }
        offsets.push(acc);
        Self { params: vec![0.0; acc], arch, offsets }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(arch);
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters given, architecture {} needs {}",
                params.len(),
                net.arch,
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// `(n_in, n_out)` of layer `k` (0-based; `k = depth − 1` is the output layer).
    pub fn layer_shape(&self, k: usize) -> (usize, usize) {
        let w = self.arch.widths();
        (w[k], w[k + 1])
    }

    fn idx(&self, k: usize, i: usize, j: usize) -> usize {
        let (n_in, _) = self.layer_shape(k);
        self.offsets[k] + i * (n_in + 1) + j
    }

    /// Flat index of weight `ω^(k+1)_{ij}`.
    pub fn weight_index(&self, k: usize, i: usize, j: usize) -> usize {
        self.idx(k, i, j)
    }

    /// Flat index of bias `b^(k+1)_i`.
    pub fn bias_index(&self, k: usize, i: usize) -> usize {
        let (n_in, _) = self.layer_shape(k);
        self.idx(k, i, n_in)
    }

    pub fn weight(&self, k: usize, i: usize, j: usize) -> f64 {
        self.params[self.idx(k, i, j)]
    }

    pub fn bias(&self, k: usize, i: usize) -> f64 {
        self.params[self.bias_index(k, i)]
    }

    pub fn set_weight(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let ix = self.idx(k, i, j);
        self.params[ix] = v;
    }

    pub fn set_bias(&mut self, k: usize, i: usize, v: f64) {
        let ix = self.bias_index(k, i);
        self.params[ix] = v;
    }

    /// Neuron `i` of layer `k` as `[w_1, …, w_{n_in}, b]`.
    pub fn row(&self, k: usize, i: usize) -> &[f64] {
        let (n_in, _) = self.layer_shape(k);
        let start = self.idx(k, i, 0);
        &self.params[start..start + n_in + 1]
    }

    pub fn row_mut(&mut self, k: usize, i: usize) -> &mut [f64] {
        let (n_in, _) = self.layer_shape(k);
        let start = self.idx(k, i, 0);
        &mut self.params[start..start + n_in + 1]
    }

    /// `W a − b` for layer `k`, written into `out`.
    #[inline]
    fn affine(&self, k: usize, a: &[f64], out: &mut [f64]) {
        let (n_in, n_out) = self.layer_shape(k);
        let layer = &self.params[self.offsets[k]..self.offsets[k + 1]];
        for (i, o) in out.iter_mut().enumerate().take(n_out) {
            let row = &layer[i * (n_in + 1)..(i + 1) * (n_in + 1)];
            let mut s = -row[n_in];
            for j in 0..n_in {
                s += row[j] * a[j];
            }
            *o = s;
        }
    }

    pub fn forward(&self, x: Point) -> f64 {
        let mut ws = Workspace::new(&self.arch);
        self.forward_cached(x, &mut ws)
    }

    /// Forward pass keeping the intermediate values needed by
    /// [`Network::backward_accumulate`].
    pub fn forward_cached(&self, x: Point, ws: &mut Workspace) -> f64 {
        let depth = self.arch.depth();
        ws.acts[0][0] = x[0];
        ws.acts[0][1] = x[1];
        for k in 0..depth - 1 {
            let (before, after) = ws.acts.split_at_mut(k + 1);
            let pre = &mut ws.pre[k];
            self.affine(k, &before[k], pre);
            for (a, &z) in after[0].iter_mut().zip(pre.iter()) {
                *a = relu(z);
            }
        }
        let mut out = [0.0];
        self.affine(depth - 1, &ws.acts[depth - 1], &mut out);
        out[0]
    }

    /// Adds `seed · ∂N(x)/∂θ` into `grad`, where `x` is the point of the last
    /// [`Network::forward_cached`] call on `ws`.
    pub fn backward_accumulate(&self, ws: &mut Workspace, seed: f64, grad: &mut [f64]) {
        let depth = self.arch.depth();
        ws.delta.clear();
        ws.delta.push(seed);
        for k in (0..depth).rev() {
            let (n_in, n_out) = self.layer_shape(k);
            let base = self.offsets[k];
            let a = &ws.acts[k];
            for i in 0..n_out {
                let d = ws.delta[i];
                if d == 0.0 {
                    continue;
                }
                let r = base + i * (n_in + 1);
                for j in 0..n_in {
                    grad[r + j] += d * a[j];
                }
                grad[r + n_in] -= d;
            }
            if k == 0 {
                break;
            }
            ws.delta_next.clear();
            ws.delta_next.resize(n_in, 0.0);
            for i in 0..n_out {
                let d = ws.delta[i];
                if d == 0.0 {
                    continue;
                }
                let r = base + i * (n_in + 1);
                for j in 0..n_in {
                    ws.delta_next[j] += self.params[r + j] * d;
                }
            }
            for (dn, &z) in ws.delta_next.iter_mut().zip(&ws.pre[k - 1]) {
                *dn *= relu_slope(z);
            }
            std::mem::swap(&mut ws.delta, &mut ws.delta_next);
        }
    }

    /// `∂N(x)/∂θ` in flat parameter order.
    pub fn grad_params(&self, x: Point) -> Vec<f64> {
        let mut ws = Workspace::new(&self.arch);
        let mut g = vec![0.0; self.params.len()];
        self.forward_cached(x, &mut ws);
        self.backward_accumulate(&mut ws, 1.0, &mut g);
        g
    }

    /// Last-hidden-layer activations at `x` and their exact directional
    /// derivatives along `dir` (forward-mode, σ'(0) = 0).
    pub fn last_hidden_with_tangent(&self, x: Point, dir: Point, vals: &mut Vec<f64>, tans: &mut Vec<f64>) {
        let depth = self.arch.depth();
        vals.clear();
        vals.extend_from_slice(&x);
        tans.clear();
        tans.extend_from_slice(&dir);
        let mut z = Vec::new();
        let mut dz = Vec::new();
        for k in 0..depth - 1 {
            let (n_in, n_out) = self.layer_shape(k);
            z.clear();
            z.resize(n_out, 0.0);
            dz.clear();
            dz.resize(n_out, 0.0);
            self.affine(k, vals, &mut z);
            for (i, dzi) in dz.iter_mut().enumerate() {
                let row = self.row(k, i);
                *dzi = (0..n_in).map(|j| row[j] * tans[j]).sum();
            }
            vals.clear();
            tans.clear();
            for i in 0..n_out {
                let s = relu_slope(z[i]);
                vals.push(relu(z[i]));
                tans.push(s * dz[i]);
            }
        }
    }

    /// Gradient with respect to the input point (a.e.).
    pub fn input_gradient(&self, x: Point) -> Point {
        let mut v = Vec::new();
        let mut t = Vec::new();
        let depth = self.arch.depth();
        let (n_in, _) = self.layer_shape(depth - 1);
        let mut g = [0.0; 2];
        for (c, e) in g.iter_mut().zip([[1.0, 0.0], [0.0, 1.0]]) {
            self.last_hidden_with_tangent(x, e, &mut v, &mut t);
            let row = self.row(depth - 1, 0);
            *c = (0..n_in).map(|j| row[j] * t[j]).sum();
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny() -> Network {
        // ω¹ = [1, 0], b¹ = 0, ω² = [1], b² = 0
        Network::from_params("2-1-1".parse().unwrap(), vec![1.0, 0.0, 0.0, 1.0, 0.0]).unwrap()
    }

    pub(crate) fn random_net(arch: &str, rng: &mut ChaCha8Rng) -> Network {
        let arch: Architecture = arch.parse().unwrap();
        let n = arch.raw_param_count();
        Network::from_params(arch, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Smallest |pre-activation| over all hidden neurons at `x`.
    pub(crate) fn min_kink_distance(net: &Network, x: Point) -> f64 {
        let mut ws = Workspace::new(net.arch());
        net.forward_cached(x, &mut ws);
        ws.pre.iter().flatten().fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }

    #[test]
    fn relu_forward() {
        let n = tiny();
        assert_eq!(n.forward([-3.0, 7.0]), 0.0);
        assert_eq!(n.forward([2.0, 5.0]), 2.0);
    }

    #[test]
    fn hand_gradient() {
        let n = tiny();
        let g = n.grad_params([2.0, 5.0]);
        // layer 1 row: [∂w11, ∂w12, ∂b1] = [2, 5, -1]; output: [∂v, ∂b2] = [σ(2), -1]
        assert_eq!(g, vec![2.0, 5.0, -1.0, 2.0, -1.0]);
        let g = n.grad_params([-3.0, 7.0]);
        assert_eq!(g, vec![0.0, 0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn output_bias_gradient_is_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for arch in ["2-3-1", "2-4-5-1", "2-2-2-2-1"] {
            let net = random_net(arch, &mut rng);
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let g = net.grad_params(x);
            assert_eq!(*g.last().unwrap(), -1.0);
        }
    }

    #[test]
    fn param_counts() {
        let cases = [
            ("2-4-1", 13, 17),
            ("2-200-1", 601, 801),
            ("2-6-1", 19, 25),
            ("2-40-1", 121, 161),
            ("2-34-1", 103, 137),
            ("2-5-5-1", 46, 51),
            ("2-6-6-1", 61, 67),
            ("2-8-8-1", 97, 105),
            ("2-25-25-1", 726, 751),
            ("2-40-40-1", 1761, 1801),
            ("2-30-30-30-1", 1951, 1981),
        ];
        for (a, paper, raw) in cases {
            let arch: Architecture = a.parse().unwrap();
            assert_eq!(arch.paper_param_count(), paper, "{a}");
            assert_eq!(arch.raw_param_count(), raw, "{a}");
            assert_eq!(Network::zeros(arch).num_params(), raw);
        }
    }

    #[test]
    fn architecture_parsing() {
        let a: Architecture = "2-5-5-1".parse().unwrap();
        assert_eq!(a.to_string(), "2-5-5-1");
        assert_eq!(a.depth(), 3);
        assert_eq!(a.hidden_widths(), &[5, 5]);
        assert!("2-1".parse::<Architecture>().is_err());
        assert!("2-0-1".parse::<Architecture>().is_err());
        assert!("2-4-2".parse::<Architecture>().is_err());
        assert!("2-x-1".parse::<Architecture>().is_err());
        assert!(Network::from_params(a, vec![0.0; 3]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for arch in ["2-4-1", "2-5-5-1", "2-6-6-1", "2-8-1"] {
            let mut checked = 0;
            while checked < 20 {
                let net = random_net(arch, &mut rng);
                let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if min_kink_distance(&net, x) < 1e-4 {
                    continue;
                }
                let g = net.grad_params(x);
                let step = 1e-6;
                let mut fd = vec![0.0; g.len()];
                for (p, f) in fd.iter_mut().enumerate() {
                    let mut plus = net.clone();
                    plus.params_mut()[p] += step;
                    let mut minus = net.clone();
                    minus.params_mut()[p] -= step;
                    *f = (plus.forward(x) - minus.forward(x)) / (2.0 * step);
                }
                let num: f64 = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let den: f64 = fd.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-12);
                assert!(num / den <= 1e-6, "{arch}: rel err {}", num / den);
                checked += 1;
            }
        }
    }

    #[test]
    fn positive_homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = random_net("2-6-1", &mut rng);
        let mut scaled = net.clone();
        for i in 0..6 {
            let lambda: f64 = rng.gen_range(0.1..10.0);
            for v in scaled.row_mut(0, i) {
                *v *= lambda;
            }
            let w = scaled.weight(1, 0, i);
            scaled.set_weight(1, 0, i, w / lambda);
        }
        for _ in 0..1_000 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            assert!((net.forward(x) - scaled.forward(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = random_net("2-5-5-1", &mut rng);
        let x = [0.3, -0.2];
        assert!(min_kink_distance(&net, x) > 1e-4);
        let g = net.input_gradient(x);
        let d = 1e-7;
        let fx = (net.forward([x[0] + d, x[1]]) - net.forward([x[0] - d, x[1]])) / (2.0 * d);
        let fy = (net.forward([x[0], x[1] + d]) - net.forward([x[0], x[1] - d])) / (2.0 * d);
        assert!((g[0] - fx).abs() < 1e-7 && (g[1] - fy).abs() < 1e-7);
    }

    #[test]
    fn embedding_order() {
        let a: Architecture = "2-5-5-1".parse().unwrap();
        let b: Architecture = "2-6-6-1".parse().unwrap();
        assert!(a.embeds_into(&b));
        assert!(!b.embeds_into(&a));
        assert!(!a.embeds_into(&"2-6-1".parse().unwrap()));
    }
}
