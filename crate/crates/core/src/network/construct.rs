//! Exact ReLU realizations of smeared step functions.
//!
//! A ramp of width `2ε` across the line `ξ·x = c` is two neurons:
//!
//! ```text
//! p(x) = α₁ + (α₂ − α₁)/(2ε) · (σ(ξ·x − c + ε) − σ(ξ·x − c − ε))
//! ```
//!
//! equal to `α₁` for `ξ·x ≤ c − ε` and `α₂` for `ξ·x ≥ c + ε`. The maximum of
//! two such ramps needs one extra hidden layer of four neurons, using
//! `max{a, b} = ½(σ(a+b) − σ(−a−b) + σ(a−b) + σ(b−a))`.

use super::{relu, Architecture, Network};
use crate::error::{Error, Result};
use crate::geometry::Point;

/// One ramp: normal `xi`, offset `c`, values `alpha1` below and `alpha2` above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RampSpec {
    pub xi: Point,
    pub c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
}

/// Two ramps sharing offset `a` and values, combined by a maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoRampSpec {
    pub xi1: Point,
    pub xi2: Point,
    pub a: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
}

impl RampSpec {
    /// Evaluates the ramp directly (no network).
    pub fn eval(&self, x: Point) -> f64 {
        let s = self.xi[0] * x[0] + self.xi[1] * x[1] - self.c;
        self.alpha1
            + (self.alpha2 - self.alpha1) / (2.0 * self.eps) * (relu(s + self.eps) - relu(s - self.eps))
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::config("eps", format!("ramp half-width must be positive, got {eps}")))
    }
}

/// 2-2-1 network realizing the ramp exactly.
pub fn construct_lemma32(spec: &RampSpec) -> Result<Network> {
    check_eps(spec.eps)?;
    let mut net = Network::zeros(Architecture::new(vec![2, 2, 1])?);
    let slope = (spec.alpha2 - spec.alpha1) / (2.0 * spec.eps);
    net.row_mut(0, 0).copy_from_slice(&[spec.xi[0], spec.xi[1], spec.c - spec.eps]);
    net.row_mut(0, 1).copy_from_slice(&[spec.xi[0], spec.xi[1], spec.c + spec.eps]);
    net.row_mut(1, 0).copy_from_slice(&[slope, -slope, -spec.alpha1]);
    Ok(net)
}

/// 2-4-4-1 network realizing `max{p₁, p₂}` of the two ramps exactly.
pub fn construct_lemma51(spec: &TwoRampSpec) -> Result<Network> {
    check_eps(spec.eps)?;
    let mut net = Network::zeros(Architecture::new(vec![2, 4, 4, 1])?);
    let (a, e) = (spec.a, spec.eps);
    let s = (spec.alpha2 - spec.alpha1) / (2.0 * e);
    let two_a1 = 2.0 * spec.alpha1;
    net.row_mut(0, 0).copy_from_slice(&[spec.xi1[0], spec.xi1[1], a - e]);
    net.row_mut(0, 1).copy_from_slice(&[spec.xi1[0], spec.xi1[1], a + e]);
    net.row_mut(0, 2).copy_from_slice(&[spec.xi2[0], spec.xi2[1], a - e]);
    net.row_mut(0, 3).copy_from_slice(&[spec.xi2[0], spec.xi2[1], a + e]);
    // p₁ = s(h₀ − h₁) + α₁, p₂ = s(h₂ − h₃) + α₁; rows give p₁+p₂, −p₁−p₂, p₁−p₂, p₂−p₁.
    net.row_mut(1, 0).copy_from_slice(&[s, -s, s, -s, -two_a1]);
    net.row_mut(1, 1).copy_from_slice(&[-s, s, -s, s, two_a1]);
    net.row_mut(1, 2).copy_from_slice(&[s, -s, -s, s, 0.0]);
    net.row_mut(1, 3).copy_from_slice(&[-s, s, s, -s, 0.0]);
    net.row_mut(2, 0).copy_from_slice(&[0.5, -0.5, 0.5, 0.5, 0.0]);
    Ok(net)
}

/// The four-neuron maximum: `½[1, −1, 1, 1] · σ(ω [a, b]ᵀ)`.
pub fn max_gadget(a: f64, b: f64) -> f64 {
    0.5 * (relu(a + b) - relu(-a - b) + relu(a - b) + relu(b - a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, SQRT_2};

    fn vline_ramp(eps: f64) -> RampSpec {
        RampSpec { xi: [1.0, 0.0], c: FRAC_PI_3, alpha1: 0.0, alpha2: 1.0, eps }
    }

    #[test]
    fn ramp_values() {
        let spec = vline_ramp(0.1);
        let net = construct_lemma32(&spec).unwrap();
        assert!((net.forward([FRAC_PI_3 + 0.2, 0.4]) - 1.0).abs() < 1e-15);
        assert!((net.forward([FRAC_PI_3, 0.4]) - 0.5).abs() < 1e-12);
        assert_eq!(net.forward([0.2, 0.9]), 0.0);
    }

    #[test]
    fn ramp_is_constant_off_the_strip() {
        let spec = RampSpec { xi: [0.6, 0.8], c: 0.3, alpha1: -1.5, alpha2: 2.0, eps: 0.05 };
        let net = construct_lemma32(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10_000 {
            let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let s = 0.6 * x[0] + 0.8 * x[1];
            let v = net.forward(x);
            if s <= spec.c - spec.eps {
                assert_eq!(v, spec.alpha1);
            } else if s >= spec.c + spec.eps {
                assert!((v - spec.alpha2).abs() <= 1e-12, "{v}");
            }
            assert!((v - spec.eval(x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_eps() {
        assert!(construct_lemma32(&vline_ramp(0.0)).is_err());
        assert!(construct_lemma32(&vline_ramp(-0.1)).is_err());
    }

    #[test]
    fn max_gadget_identity() {
        assert_eq!(max_gadget(3.0, 5.0), 5.0);
        assert_eq!(max_gadget(-2.0, -7.0), -2.0);
        assert_eq!(max_gadget(1.5, 1.5), 1.5);
    }

    #[test]
    fn two_ramp_network_is_pointwise_max() {
        let spec = TwoRampSpec {
            xi1: [1.0, SQRT_2 - 1.0],
            xi2: [SQRT_2 - 1.0, 1.0],
            a: 43.0 / 64.0,
            alpha1: -1.0,
            alpha2: 1.0,
            eps: 0.05,
        };
        let net = construct_lemma51(&spec).unwrap();
        let p1 = RampSpec { xi: spec.xi1, c: spec.a, alpha1: -1.0, alpha2: 1.0, eps: 0.05 };
        let p2 = RampSpec { xi: spec.xi2, ..p1 };
        let single = construct_lemma32(&p1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let want = p1.eval(x).max(p2.eval(x));
            assert!((net.forward(x) - want).abs() <= 1e-14);
            if x[1] < x[0] {
                assert!((net.forward(x) - single.forward(x)).abs() <= 1e-14);
            }
        }
    }
}
