//! Dense symmetric positive-definite solves.

use crate::error::{Error, Result};

/// Pivots at or below this fraction of the original diagonal entry are
/// treated as a breakdown.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix rows must all have length n".into()));
        }
        Ok(Self { n, data: rows.concat() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }
}

impl std::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    /// Factorizes `a`, reading only its lower triangle.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            let scale = a[(j, j)].abs().max(f64::MIN_POSITIVE);
            if !(d > PIVOT_TOLERANCE * scale) {
                return Err(Error::NotPositiveDefinite { row: j, pivot: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[(i, k)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                y[i] -= self.l[(k, i)] * y[k];
            }
            y[i] /= self.l[(i, i)];
        }
        y
    }

    /// Smallest diagonal entry of `L`, squared (the smallest pivot).
    pub fn min_pivot(&self) -> f64 {
        (0..self.l.dim()).map(|i| self.l[(i, i)].powi(2)).fold(f64::INFINITY, f64::min)
    }
}

/// Greedy column selection: indices `j` whose pivot stays above
/// `PIVOT_TOLERANCE · a_jj` when factoring only the previously kept columns.
/// The selected principal submatrix is positive definite.
pub fn independent_subset(a: &SquareMatrix) -> Vec<usize> {
    let n = a.dim();
    let mut kept: Vec<usize> = Vec::new();
    // rows of L restricted to kept columns, one per kept index
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        let mut lj = Vec::with_capacity(kept.len());
        for (r, &k) in kept.iter().enumerate() {
            let mut s = a[(j, k)];
            for m in 0..r {
                s -= lj[m] * rows[r][m];
            }
            lj.push(s / rows[r][r]);
        }
        let d = a[(j, j)] - lj.iter().map(|v| v * v).sum::<f64>();
        if d > PIVOT_TOLERANCE * a[(j, j)].abs().max(f64::MIN_POSITIVE) {
            lj.push(d.sqrt());
            rows.push(lj);
            kept.push(j);
        }
    }
    kept
}
