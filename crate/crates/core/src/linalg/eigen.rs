use super::{ComplexMatrix, HermitianMatrix, C64};
use crate::error::Result;

/// Eigenpairs of a Hermitian matrix, eigenvalues in descending order and the
/// matching unit eigenvectors stored as columns.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigDecomposition {
    /// `U diag(f(λ)) U^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        ComplexMatrix::from_fn(n, n, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &w) in weights.iter().enumerate() {
                if w != 0.0 {
                    acc += u[(r, k)] * u[(c, k)].conj() * w;
                }
            }
            acc
        })
    }

    /// `U diag(w) U^H` with one weight per eigenpair.
    pub fn reconstruct_with_weights(&self, w: &[f64]) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let n = u.rows();
        ComplexMatrix::from_fn(n, n, |r, c| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, &wk) in w.iter().enumerate() {
                if wk != 0.0 {
                    acc += u[(r, k)] * u[(c, k)].conj() * wk;
                }
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| l)
    }
}

const MAX_SWEEPS: usize = 64;

/// Cyclic complex Jacobi eigendecomposition.
pub fn eigh(a: &HermitianMatrix) -> EigDecomposition {
    let n = a.dim();
    let mut m: Vec<C64> = a.as_matrix().as_slice().to_vec();
    let mut v: Vec<C64> = ComplexMatrix::identity(n).as_slice().to_vec();
    let scale: f64 = m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    if n > 1 && scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += m[p * n + q].norm_sqr();
                }
            }
            if off.sqrt() <= 1e-16 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, n, p, q, scale);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    order.sort_by(|&x, &y| diag[y].total_cmp(&diag[x]));
    let eigenvalues = order.iter().map(|&k| diag[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    EigDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Validating entry point for raw matrices.
pub fn eigh_matrix(a: &ComplexMatrix) -> Result<EigDecomposition> {
    Ok(eigh(&HermitianMatrix::new(a.clone())?))
}

fn rotate(m: &mut [C64], v: &mut [C64], n: usize, p: usize, q: usize, scale: f64) {
    let apq = m[p * n + q];
    let r = apq.norm();
    if r <= 1e-300 || r <= 1e-18 * scale {
        m[p * n + q] = C64::new(0.0, 0.0);
        m[q * n + p] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / r;
    let app = m[p * n + p].re;
    let aqq = m[q * n + q].re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J = [[c, s e^{iφ}], [-s e^{-iφ}, c]] acting on columns p, q.
    let jpq = phase * s;
    let jqp = -phase.conj() * s;

    for k in 0..n {
        let akp = m[k * n + p];
        let akq = m[k * n + q];
        m[k * n + p] = akp * c + akq * jqp;
        m[k * n + q] = akp * jpq + akq * c;
    }
    for k in 0..n {
        let apk = m[p * n + k];
        let aqk = m[q * n + k];
        m[p * n + k] = apk * c + aqk * jqp.conj();
        m[q * n + k] = apk * jpq.conj() + aqk * c;
    }
    m[p * n + q] = C64::new(0.0, 0.0);
    m[q * n + p] = C64::new(0.0, 0.0);
    m[p * n + p] = C64::new(m[p * n + p].re, 0.0);
    m[q * n + q] = C64::new(m[q * n + q].re, 0.0);

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * c + vkq * jqp;
        v[k * n + q] = vkp * jpq + vkq * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn unitarity_residual(u: &ComplexMatrix) -> f64 {
        (&u.adjoint_mul(u) - &ComplexMatrix::identity(u.cols())).frobenius_norm()
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let eig = eigh(&HermitianMatrix::new(ComplexMatrix::identity(3)).unwrap());
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!(unitarity_residual(&eig.eigenvectors) < 1e-12);
    }

    #[test]
    fn diagonal_is_sorted_descending() {
        let a = HermitianMatrix::new(ComplexMatrix::from_diag(&[2.0, 5.0, -1.0])).unwrap();
        let eig = eigh(&a);
        assert_eq!(eig.eigenvalues, vec![5.0, 2.0, -1.0]);
    }

    #[test]
    fn two_by_two_complex() {
        // [[2, i], [-i, 2]] has eigenvalues 3 and 1.
        let a = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let eig = eigh_matrix(&a).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((&eig.reconstruct() - &a).frobenius_norm() < 1e-13);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = ComplexMatrix::from_row_major(
            2,
            2,
            vec![
                C64::new(1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
            ],
        )
        .unwrap();
        assert!(eigh_matrix(&a).is_err());
    }
}
