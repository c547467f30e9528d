//! Small dense linear algebra: row-major matrices, Cholesky factorization,
//! SPD solves, log-determinants and weighted norms.
//!
//! Everything here is sized for bandit work (k up to a few dozen), so the
//! routines are straightforward O(k³) loops over contiguous storage.

use crate::error::{AlbError, Result};

/// Relative tolerance for the symmetry check in [`spd_factor`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// Dense row-major matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m.check_finite()?;
        Ok(m)
    }

    /// Builds a matrix from row-major entries, rejecting shape mismatches and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(AlbError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        let m = Self { rows, cols, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(AlbError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(AlbError::NonFinite)
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        self.row_mut(i).copy_from_slice(values);
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(AlbError::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for p in 0..self.cols {
                let a = self[(i, p)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(p);
                let dst = out.row_mut(i);
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`, the product used for `Y = A·Bᵀ`.
    pub fn matmul_transpose(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(AlbError::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out[(i, j)] = dot(a, other.row(j));
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(AlbError::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Adds `x xᵀ` in place; `self` must be square of size `x.len()`.
    pub fn add_outer(&mut self, x: &[f64]) {
        debug_assert_eq!(self.rows, x.len());
        debug_assert_eq!(self.cols, x.len());
        for (i, &xi) in x.iter().enumerate() {
            let row = self.row_mut(i);
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += xi * xj;
            }
        }
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cholesky factor `L` with `M = L·Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdFactorization {
    lower: Matrix,
}

/// Factors a symmetric positive-definite matrix.
///
/// The input is symmetrized as `(M + Mᵀ)/2` after checking that the
/// asymmetry is within [`SYMMETRY_TOLERANCE`] relative to the largest entry.
pub fn spd_factor(m: &Matrix) -> Result<SpdFactorization> {
    let n = m.rows();
    if m.cols() != n {
        return Err(AlbError::NotSquare {
            rows: n,
            cols: m.cols(),
        });
    }
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut lower = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(AlbError::NotSymmetric { row: i, col: j });
            }
        }
    }
    for j in 0..n {
        let mut diag = m[(j, j)];
        for p in 0..j {
            diag -= lower[(j, p)] * lower[(j, p)];
        }
        if !(diag > 0.0) {
            return Err(AlbError::NotPositiveDefinite { pivot: j });
        }
        let d = diag.sqrt();
        lower[(j, j)] = d;
        for i in (j + 1)..n {
            let mut acc = 0.5 * (m[(i, j)] + m[(j, i)]);
            for p in 0..j {
                acc -= lower[(i, p)] * lower[(j, p)];
            }
            lower[(i, j)] = acc / d;
        }
    }
    Ok(SpdFactorization { lower })
}

impl SpdFactorization {
    pub fn dimension(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.lower
            .matmul_transpose(&self.lower)
            .expect("square factor")
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.dimension() {
            Ok(())
        } else {
            Err(AlbError::DimensionMismatch {
                expected: self.dimension(),
                found: len,
            })
        }
    }

    /// Solves `L·w = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_len(b.len())?;
        let n = self.dimension();
        let mut w = b.to_vec();
        for i in 0..n {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &w[..i]);
            w[i] = (w[i] - s) / row[i];
        }
        Ok(w)
    }

    /// Solves `Lᵀ·x = w`.
    pub fn backward_solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_len(w.len())?;
        let n = self.dimension();
        let mut x = w.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for p in (i + 1)..n {
                s -= self.lower[(p, i)] * x[p];
            }
            x[i] = s / self.lower[(i, i)];
        }
        Ok(x)
    }

    /// Solves `M·x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let w = self.forward_solve(b)?;
        self.backward_solve(&w)
    }

    /// `ln det M = 2·Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        (0..self.dimension())
            .map(|i| self.lower[(i, i)].ln())
            .sum::<f64>()
            * 2.0
    }

    /// `‖x‖_M = √(xᵀMx) = ‖Lᵀx‖₂`.
    pub fn weighted_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let n = self.dimension();
        let mut acc = 0.0;
        for j in 0..n {
            let mut s = 0.0;
            for i in j..n {
                s += self.lower[(i, j)] * x[i];
            }
            acc += s * s;
        }
        Ok(acc.sqrt())
    }

    /// `‖M^{-1/2}x‖₂ = √(xᵀM⁻¹x) = ‖L⁻¹x‖₂`.
    pub fn inverse_weighted_norm(&self, x: &[f64]) -> Result<f64> {
        Ok(norm2(&self.forward_solve(x)?))
    }
}

/// Thin free-function wrappers matching the operation names used across the
/// crate and the C ABI.
pub fn spd_solve(f: &SpdFactorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

pub fn log_det(f: &SpdFactorization) -> f64 {
    f.log_det()
}

pub fn weighted_norm(f: &SpdFactorization, x: &[f64]) -> Result<f64> {
    f.weighted_norm(x)
}

/// Solves the ridge problem `(XᵀX + λI)⁻¹ (Xᵀy + λ·prior)` over the given
/// rows. With `prior = None` this is ordinary ridge regression shrinking
/// toward zero. Returns the solution together with the factored Gram matrix
/// `λI + XᵀX`.
pub fn ridge<'a, I>(
    rows: I,
    lambda: f64,
    k: usize,
    prior: Option<&[f64]>,
) -> Result<(Vec<f64>, Matrix, SpdFactorization)>
where
    I: IntoIterator<Item = (&'a [f64], f64)>,
{
    let mut gram = Matrix::identity(k);
    for v in gram.data.iter_mut() {
        *v *= lambda;
    }
    let mut rhs = match prior {
        Some(p) => p.iter().map(|v| v * lambda).collect(),
        None => vec![0.0; k],
    };
    for (x, y) in rows {
        gram.add_outer(x);
        for (r, &xi) in rhs.iter_mut().zip(x) {
            *r += xi * y;
        }
    }
    let factor = spd_factor(&gram)?;
    let solution = factor.solve(&rhs)?;
    Ok((solution, gram, factor))
}
