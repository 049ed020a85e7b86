use serde::{Deserialize, Serialize};

use super::{eigh, project_capped_simplex, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// A square matrix equal to its conjugate transpose (to a relative 1e-12).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    pub fn new(a: ComplexMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let tol = 1e-12 * (1.0 + a.max_abs());
        let mut asym: f64 = 0.0;
        for r in 0..n {
            for c in r..n {
                asym = asym.max((a[(r, c)] - a[(c, r)].conj()).norm());
            }
        }
        if asym > tol {
            return Err(Error::NotHermitian { asymmetry: asym });
        }
        Ok(Self::from_matrix_unchecked(a))
    }

    /// Symmetrises `a` without checking; callers guarantee it is Hermitian up to rounding.
    pub(crate) fn from_matrix_unchecked(a: ComplexMatrix) -> Self {
        Self(a.hermitian_part())
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// `x^H A x`.
    pub fn quad_form(&self, x: &[C64]) -> f64 {
        self.0.quad_form(x)
    }
}

/// Hermitian matrix whose smallest eigenvalue is at least `-1e-9 (1 + trace)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdMatrix(HermitianMatrix);

impl PsdMatrix {
    pub fn new(a: HermitianMatrix) -> Result<Self> {
        let eig = eigh(&a);
        let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -1e-9 * (1.0 + a.trace().abs()) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Self(a))
    }

    pub fn from_matrix(a: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(a)?)
    }

    pub fn zeros(n: usize) -> Self {
        Self(HermitianMatrix(ComplexMatrix::zeros(n, n)))
    }

    /// Wraps a matrix built as `B diag(p) B^H` with `p >= 0`.
    pub(crate) fn from_gram_unchecked(a: ComplexMatrix) -> Self {
        Self(HermitianMatrix::from_matrix_unchecked(a))
    }

    /// Clips negative eigenvalues to zero.
    pub fn project(a: &HermitianMatrix) -> Self {
        let eig = eigh(a);
        Self::from_gram_unchecked(eig.reconstruct_with(|l| l.max(0.0)))
    }

    /// Frobenius projection onto `{S ⪰ 0, tr S <= budget}`.
    pub fn project_budget(a: &HermitianMatrix, budget: f64) -> Self {
        let eig = eigh(a);
        let w = project_capped_simplex(&eig.eigenvalues, budget);
        Self::from_gram_unchecked(eig.reconstruct_with_weights(&w))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.0.as_matrix()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn scaled(&self, s: f64) -> Self {
        assert!(s >= 0.0);
        Self(HermitianMatrix(self.0 .0.scale(s)))
    }

    /// `tr(G^H S G)` for an `N x c` channel `G`; for a column `h` this is `h^H S h`.
    pub fn received_power(&self, g: &ComplexMatrix) -> f64 {
        let sg = self.as_matrix() * g;
        g.adjoint_mul(&sg).trace().re.max(0.0)
    }

    /// Eigenvalues, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigh(&self.0).eigenvalues
    }
}

/// `ln det(I + H^H S H)` in nats, evaluated from the eigenvalues of the Hermitian argument.
pub fn logdet_capacity(h: &ComplexMatrix, s: &PsdMatrix) -> Result<f64> {
    if h.rows() != s.dim() {
        return Err(Error::Dimension(format!(
            "channel has {} rows but covariance is {}x{}",
            h.rows(),
            s.dim(),
            s.dim()
        )));
    }
    Ok(logdet_unchecked(h, s.as_matrix()))
}

pub(crate) fn logdet_unchecked(h: &ComplexMatrix, s: &ComplexMatrix) -> f64 {
    let sh = s * h;
    let arg = HermitianMatrix::from_matrix_unchecked(h.adjoint_mul(&sh));
    eigh(&arg).eigenvalues.iter().map(|&l| l.max(0.0).ln_1p()).sum()
}

/// Default eigenvalue floor for whitening a possibly singular dual matrix.
pub fn default_whitening_floor(a: &HermitianMatrix) -> f64 {
    let top = eigh(a).eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    1e-10 * (1.0 + top)
}

/// `A_f^{-1/2}`, where `A_f` lifts every eigenvalue of `A` below `floor` up to `floor`.
pub fn whiten_inv_sqrt(a: &HermitianMatrix, floor: f64) -> Result<ComplexMatrix> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "whitening floor must be positive, got {floor}"
        )));
    }
    Ok(eigh(a).reconstruct_with(|l| 1.0 / l.max(floor).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn psd_rejects_negative_direction() {
        let a = ComplexMatrix::from_diag(&[1.0, -0.5]);
        assert!(matches!(PsdMatrix::from_matrix(a), Err(Error::NotPsd { .. })));
        let tiny = ComplexMatrix::from_diag(&[1.0, -1e-12]);
        assert!(PsdMatrix::from_matrix(tiny).is_ok());
    }

    #[test]
    fn capacity_of_zero_covariance_is_zero() {
        let h = ComplexMatrix::from_fn(3, 2, |r, k| C64::new(r as f64, k as f64 + 1.0));
        assert_eq!(logdet_capacity(&h, &PsdMatrix::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn scalar_capacity() {
        let h = ComplexMatrix::column(&[C64::new(1.0, 1.0)]); // |h|^2 = 2
        let s = PsdMatrix::from_matrix(ComplexMatrix::from_diag(&[3.0])).unwrap();
        let cap = logdet_capacity(&h, &s).unwrap();
        assert!((cap - 7f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn capacity_dimension_mismatch() {
        let h = ComplexMatrix::column(&[c(1.0), c(2.0)]);
        assert!(logdet_capacity(&h, &PsdMatrix::zeros(3)).is_err());
    }

    #[test]
    fn whitening_examples() {
        let id = HermitianMatrix::identity(3);
        let w = whiten_inv_sqrt(&id, 1e-12).unwrap();
        assert!((&w - &ComplexMatrix::identity(3)).frobenius_norm() < 1e-14);

        let d = HermitianMatrix::new(ComplexMatrix::from_diag(&[4.0, 9.0])).unwrap();
        let w = whiten_inv_sqrt(&d, 1e-12).unwrap();
        assert!((&w - &ComplexMatrix::from_diag(&[0.5, 1.0 / 3.0])).frobenius_norm() < 1e-14);

        let sing = HermitianMatrix::new(ComplexMatrix::from_diag(&[1.0, 0.0])).unwrap();
        let w = whiten_inv_sqrt(&sing, 1e-6).unwrap();
        assert!((w[(1, 1)].re - 1e3).abs() < 1e-9);
        assert!(whiten_inv_sqrt(&sing, 0.0).is_err());
    }

    #[test]
    fn received_power_matches_quadratic_form() {
        let s = PsdMatrix::from_matrix(ComplexMatrix::from_diag(&[2.0, 1.0])).unwrap();
        let h = [C64::new(1.0, 1.0), C64::new(0.0, 3.0)];
        let g = ComplexMatrix::column(&h);
        assert!((s.received_power(&g) - (2.0 * 2.0 + 9.0)).abs() < 1e-12);
    }
}
