//! Advection velocity fields.
//!
//! `SectorApprox(n)` splits the first quadrant into `n` sectors at the angles
//! `t_i = iπ/(2n)` and uses, in sector `i`, the chord direction
//! `(cos t_{i+1} − cos t_i, sin t_{i+1} − sin t_i)` of the unit quarter circle.
//! Its streamlines are polygons approximating the circular streamlines of
//! `Rotational`. `SectorApprox(2)` points the same way as `TwoSectorDiagonal`
//! but is shorter by the factor √2/2; both are kept exactly as defined.

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{norm, Point};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VelocityField {
    Constant(Point),
    /// `(1−√2, 1)` below the diagonal (`y < x`), `(−1, √2−1)` on and above it.
    TwoSectorDiagonal,
    /// `(−y, x)`.
    Rotational,
    SectorApprox(usize),
}

impl VelocityField {
    pub fn constant(bx: f64, by: f64) -> Result<Self> {
        if bx == 0.0 && by == 0.0 || !bx.is_finite() || !by.is_finite() {
            return Err(Error::config("field", "constant velocity must be finite and nonzero"));
        }
        Ok(Self::Constant([bx, by]))
    }

    pub fn sectors(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("field", format!("sector count must be >= 2, got {n}")));
        }
        Ok(Self::SectorApprox(n))
    }

    pub fn eval(&self, x: Point) -> Point {
        match *self {
            Self::Constant(b) => b,
            Self::TwoSectorDiagonal => {
                if x[1] < x[0] {
                    [1.0 - SQRT_2, 1.0]
                } else {
                    [-1.0, SQRT_2 - 1.0]
                }
            }
            Self::Rotational => [-x[1], x[0]],
            Self::SectorApprox(n) => {
                let i = sector_index(n, x);
                let (t0, t1) = (sector_angle(n, i), sector_angle(n, i + 1));
                [t1.cos() - t0.cos(), t1.sin() - t0.sin()]
            }
        }
    }

    /// The field direction normalized to unit length.
    pub fn unit(&self, x: Point) -> Result<Point> {
        let b = self.eval(x);
        let len = norm(b);
        if len == 0.0 {
            return Err(Error::SingularField(x[0], x[1]));
        }
        Ok([b[0] / len, b[1] / len])
    }

    pub fn speed(&self, x: Point) -> f64 {
        norm(self.eval(x))
    }
}

/// `t_i = iπ/(2n)`.
pub fn sector_angle(n: usize, i: usize) -> f64 {
    i as f64 * FRAC_PI_2 / n as f64
}

/// Index `i ∈ 0..n` of the sector `t_i < θ ≤ t_{i+1}` containing `x`, where `θ`
/// is the polar angle. Rays belong to the lower sector; angles below the
/// quadrant (and the origin) map to sector 0, angles above it to `n − 1`.
pub fn sector_index(n: usize, x: Point) -> usize {
    let theta = x[1].atan2(x[0]);
    (0..n).find(|&i| theta <= sector_angle(n, i + 1)).unwrap_or(n - 1)
}

impl fmt::Display for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant([bx, by]) => write!(f, "constant:{bx},{by}"),
            Self::TwoSectorDiagonal => write!(f, "two-sector"),
            Self::Rotational => write!(f, "rotational"),
            Self::SectorApprox(n) => write!(f, "sectors:{n}"),
        }
    }
}

impl FromStr for VelocityField {
    type Err = Error;

    /// Accepts `constant:<bx>,<by>`, `two-sector`, `rotational`, `sectors:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("unknown velocity field `{s}`"));
        if s == "two-sector" {
            return Ok(Self::TwoSectorDiagonal);
        }
        if s == "rotational" {
            return Ok(Self::Rotational);
        }
        if let Some(rest) = s.strip_prefix("constant:") {
            let (bx, by) = rest.split_once(',').ok_or_else(bad)?;
            let bx: f64 = bx.trim().parse().map_err(|_| bad())?;
            let by: f64 = by.trim().parse().map_err(|_| bad())?;
            return Self::constant(bx, by);
        }
        if let Some(rest) = s.strip_prefix("sectors:") {
            let n: usize = rest.trim().parse().map_err(|_| bad())?;
            return Self::sectors(n);
        }
        Err(bad())
    }
}
