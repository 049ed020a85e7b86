//! Dense complex linear algebra for the small matrices the solvers work with.
//!
//! Everything here is sized for antenna arrays (a handful of rows and
//! columns), so storage is a plain row-major `Vec` and the algorithms are the
//! textbook O(n³) ones.

mod eigen;
mod hermitian;
mod real;
mod waterfill;

pub use eigen::{eigh, eigh_matrix, EigDecomposition};
pub use hermitian::{default_whitening_floor, logdet_capacity, whiten_inv_sqrt, HermitianMatrix, PsdMatrix};
pub(crate) use real::{project_capped_simplex, solve_damped_spd};
pub use waterfill::{budgeted_waterfill, penalized_waterfill, penalized_waterfill_objective};

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, rejecting empty shapes and non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty matrix shape {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        m
    }

    /// Column vector from its entries.
    pub fn column(entries: &[C64]) -> Self {
        Self {
            rows: entries.len(),
            cols: 1,
            data: entries.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn col_matrix(&self, c: usize) -> Self {
        Self::column(&self.col(c))
    }

    /// Keeps the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `self * other^H`, the Gram-style product used for `H H^H`.
    pub fn mul_adjoint(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols, "mul_adjoint shape mismatch");
        Self::from_fn(self.rows, other.rows, |r, c| {
            (0..self.cols).map(|k| self[(r, k)] * other[(c, k)].conj()).sum()
        })
    }

    /// `self^H * other`.
    pub fn adjoint_mul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "adjoint_mul shape mismatch");
        Self::from_fn(self.cols, other.cols, |r, c| {
            (0..self.rows).map(|k| self[(k, r)].conj() * other[(k, c)]).sum()
        })
    }

    /// Real part of the quadratic form `x^H self x`.
    pub fn quad_form(&self, x: &[C64]) -> f64 {
        debug_assert!(self.is_square() && x.len() == self.rows);
        let mut acc = C64::new(0.0, 0.0);
        for r in 0..self.rows {
            let mut row = C64::new(0.0, 0.0);
            for c in 0..self.cols {
                row += self[(r, c)] * x[c];
            }
            acc += x[r].conj() * row;
        }
        acc.re
    }

    /// Hermitian part `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    /// Orthonormal basis of the orthogonal complement of this matrix's column space.
    ///
    /// Columns whose contribution falls below `rel_tol` times the largest
    /// singular value are treated as rank deficient.
    pub fn orthogonal_complement(&self, rel_tol: f64) -> Option<Self> {
        let gram = HermitianMatrix::from_matrix_unchecked(self.mul_adjoint(self));
        let eig = eigh(&gram);
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        let cutoff = rel_tol * top.max(f64::MIN_POSITIVE);
        let keep: Vec<usize> = (0..self.rows).filter(|&k| eig.eigenvalues[k] <= cutoff).collect();
        if keep.is_empty() {
            None
        } else {
            Some(eig.eigenvectors.select_cols(&keep))
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Lower Cholesky factor of a Hermitian positive definite matrix; `None` when a
/// pivot drops to `min_pivot` or below.
pub fn cholesky(a: &ComplexMatrix, min_pivot: f64) -> Option<ComplexMatrix> {
    let n = a.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > min_pivot) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / djj;
        }
    }
    Some(l)
}

/// Solves `L X = B` for lower-triangular `L`.
pub fn solve_lower(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for r in 0..n {
            let mut v = x[(r, c)];
            for k in 0..r {
                v -= l[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = v / l[(r, r)];
        }
    }
    x
}

/// Solves `L^H X = B` for lower-triangular `L`.
pub fn solve_lower_adjoint(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut x = b.clone();
    for c in 0..b.cols() {
        for r in (0..n).rev() {
            let mut v = x[(r, c)];
            for k in (r + 1)..n {
                v -= l[(k, r)].conj() * x[(k, c)];
            }
            x[(r, c)] = v / l[(r, r)];
        }
    }
    x
}

/// Squared Euclidean norm of a complex vector.
pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ComplexMatrix::from_row_major(2, 2, vec![C64::new(1.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_row_major(0, 2, vec![]).is_err());
        let nan = vec![C64::new(f64::NAN, 0.0)];
        assert!(ComplexMatrix::from_row_major(1, 1, nan).is_err());
    }

    #[test]
    fn products_agree() {
        let a = ComplexMatrix::from_fn(3, 2, |r, c| C64::new(r as f64 + 1.0, c as f64 - 0.5));
        let b = ComplexMatrix::from_fn(3, 4, |r, c| C64::new(0.3 * c as f64, r as f64));
        let direct = &a.adjoint() * &b;
        let fused = a.adjoint_mul(&b);
        assert!((&direct - &fused).frobenius_norm() < 1e-12);
        let g1 = &a * &a.adjoint();
        let g2 = a.mul_adjoint(&a);
        assert!((&g1 - &g2).frobenius_norm() < 1e-12);
    }

    #[test]
    fn cholesky_solves() {
        let b = ComplexMatrix::from_fn(3, 3, |r, c| {
            C64::new((r + 2 * c) as f64 * 0.3 - 0.4, r as f64 - c as f64)
        });
        let a = &b.mul_adjoint(&b) + &ComplexMatrix::identity(3);
        let l = cholesky(&a, 0.0).unwrap();
        assert!((&l.mul_adjoint(&l) - &a).frobenius_norm() < 1e-12);
        let rhs = ComplexMatrix::from_fn(3, 2, |r, c| C64::new(r as f64, c as f64 + 1.0));
        let x = solve_lower(&l, &rhs);
        assert!((&(&l * &x) - &rhs).frobenius_norm() < 1e-12);
        let y = solve_lower_adjoint(&l, &rhs);
        assert!((&(&l.adjoint() * &y) - &rhs).frobenius_norm() < 1e-12);
        assert!(cholesky(&ComplexMatrix::from_diag(&[1.0, 0.0]), 1e-12).is_none());
    }

    #[test]
    fn complement_is_orthogonal() {
        let h = ComplexMatrix::column(&[C64::new(1.0, 1.0), C64::new(0.0, 2.0), C64::new(-1.0, 0.0)]);
        let q = h.orthogonal_complement(1e-10).unwrap();
        assert_eq!(q.cols(), 2);
        assert!(q.adjoint_mul(&h).frobenius_norm() < 1e-12);
        let gram = q.adjoint_mul(&q);
        assert!((&gram - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-12);
    }
}
