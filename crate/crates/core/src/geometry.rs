//! Rectangular domains, uniform square integration meshes, and the inflow
//! part of the boundary.
//!
//! A mesh of size `h` carries one [`Cell`] per square (centroid and area) in
//! row-major order: rows bottom to top, cells left to right within a row.
//! [`IntegrationMesh::with_inflow`] adds one [`BoundaryEdge`] per boundary
//! segment of length `h` whose centroid sees β·n < 0, ordered bottom, right,
//! top, left with increasing coordinate along each side.

use crate::error::{Error, Result};
use crate::velocity::VelocityField;

/// A point (or vector) in the plane.
pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Axis-aligned rectangle `(x_lo, x_hi) × (y_lo, y_hi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Domain {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        if !(x_lo < x_hi) {
            return Err(Error::config("domain.x", format!("need x_lo < x_hi, got {x_lo} >= {x_hi}")));
        }
        if !(y_lo < y_hi) {
            return Err(Error::config("domain.y", format!("need y_lo < y_hi, got {y_lo} >= {y_hi}")));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    pub fn unit_square() -> Self {
        Self { x_lo: 0.0, x_hi: 1.0, y_lo: 0.0, y_hi: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_lo && p[0] <= self.x_hi && p[1] >= self.y_lo && p[1] <= self.y_hi
    }
}

/// Square quadrature cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub centroid: Point,
    pub measure: f64,
}

/// Boundary segment on the inflow part of ∂Ω.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub centroid: Point,
    pub measure: f64,
    pub outward_normal: Point,
    /// |β·n| at the centroid.
    pub inflow_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrationMesh {
    pub domain: Domain,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    pub cells: Vec<Cell>,
    pub inflow_edges: Vec<BoundaryEdge>,
}

fn divisions(length: f64, h: f64, field: &str) -> Result<usize> {
    let n = (length / h).round();
    if n < 1.0 || (n * h - length).abs() > 1e-9 * length {
        return Err(Error::config(
            field,
            format!("side length {length} is not an integer multiple of h = {h}"),
        ));
    }
    Ok(n as usize)
}

impl IntegrationMesh {
    /// Uniform partition of `domain` into squares of side `h`; no edges yet.
    pub fn uniform(domain: Domain, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::config("h", format!("mesh size must be positive, got {h}")));
        }
        let nx = divisions(domain.width(), h, "h (x-direction)")?;
        let ny = divisions(domain.height(), h, "h (y-direction)")?;
        // Use the exact cell size implied by the division count.
        let hx = domain.width() / nx as f64;
        let hy = domain.height() / ny as f64;
        let mut cells = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let y = domain.y_lo + (j as f64 + 0.5) * hy;
            for i in 0..nx {
                let x = domain.x_lo + (i as f64 + 0.5) * hx;
                cells.push(Cell { centroid: [x, y], measure: hx * hy });
            }
        }
        Ok(Self { domain, h, nx, ny, cells, inflow_edges: Vec::new() })
    }

    /// Populates the inflow edges for `beta`, replacing any previous set.
    pub fn with_inflow(mut self, beta: &VelocityField) -> Self {
        self.inflow_edges = self.boundary_segments().filter_map(|(c, len, n)| {
            let flux = dot(beta.eval(c), n);
            (flux < 0.0).then_some(BoundaryEdge {
                centroid: c,
                measure: len,
                outward_normal: n,
                inflow_weight: -flux,
            })
        })
        .collect();
        self
    }

    /// All boundary segments as (centroid, length, outward normal), in
    /// bottom, right, top, left order.
    fn boundary_segments(&self) -> impl Iterator<Item = (Point, f64, Point)> + '_ {
        let d = self.domain;
        let hx = d.width() / self.nx as f64;
        let hy = d.height() / self.ny as f64;
        let xs = move |i: usize| d.x_lo + (i as f64 + 0.5) * hx;
        let ys = move |j: usize| d.y_lo + (j as f64 + 0.5) * hy;
        let bottom = (0..self.nx).map(move |i| ([xs(i), d.y_lo], hx, [0.0, -1.0]));
        let right = (0..self.ny).map(move |j| ([d.x_hi, ys(j)], hy, [1.0, 0.0]));
        let top = (0..self.nx).map(move |i| ([xs(i), d.y_hi], hx, [0.0, 1.0]));
        let left = (0..self.ny).map(move |j| ([d.x_lo, ys(j)], hy, [-1.0, 0.0]));
        bottom.chain(right).chain(top).chain(left)
    }

    pub fn total_cell_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    pub fn total_inflow_measure(&self) -> f64 {
        self.inflow_edges.iter().map(|e| e.measure).sum()
    }
}

/// Builds the cell-only mesh.
pub fn build_uniform_mesh(domain: Domain, h: f64) -> Result<IntegrationMesh> {
    IntegrationMesh::uniform(domain, h)
}

/// Builds the inflow partition of an existing mesh.
pub fn build_inflow_partition(mesh: IntegrationMesh, beta: &VelocityField) -> IntegrationMesh {
    mesh.with_inflow(beta)
}
