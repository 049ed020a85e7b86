//! Secrecy capacity of the MIMO wiretap channel with several eavesdroppers.
//!
//! The secrecy rate `min_i [ln det(I + H_s^H S H_s) − ln(1 + h_i^H S h_i / σ_i²)]`
//! is non-concave in `S`, but fixing the leakage levels `Γ_i = h_i^H S h_i`
//! turns the main term into the spectrum-sharing capacity `ln g(Γ)` of
//! [`crate::cr`]. The secrecy capacity is then
//!
//! ```text
//!     max_Γ  min_i  g(Γ) / (1 + Γ_i / σ_i²)
//! ```
//!
//! a maximisation over the box `0 <= Γ_i <= P λ_max(h_i h_i^H)`, solved here by
//! bisection on its level with certified bounds at every step.

mod algorithm1;
mod algorithm2;
mod bounds;
mod feasibility;
mod miso;

pub use algorithm1::algorithm1;
pub use algorithm2::algorithm2;
pub use bounds::{bounds, lower_bound_multiantenna, upper_bound_multiantenna, BoundsResult};
pub use feasibility::{feasibility_check, CertificateCell, FeasibilityOutcome, Verdict, DEFAULT_WITNESS_TOL};
pub use miso::miso_solve;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{logdet_capacity, ComplexMatrix, PsdMatrix, C64};

/// Default bisection tolerance on the rate, in nats.
pub const DEFAULT_EPS_RATE: f64 = 1e-3;

/// Eavesdroppers whose rate is within this of the minimum count as attaining it.
pub const TIE_TOL: f64 = 1e-9;

/// One eavesdropper: a single receive antenna with noise variance `sigma2`, or
/// an `N x N_e` channel with one noise variance per antenna.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Eavesdropper {
    Single { h: Vec<C64>, sigma2: f64 },
    Multi { h: ComplexMatrix, sigma2: Vec<f64> },
}

impl Eavesdropper {
    fn antennas(&self) -> usize {
        match self {
            Eavesdropper::Single { .. } => 1,
            Eavesdropper::Multi { h, .. } => h.cols(),
        }
    }

    /// Channel with every column divided by its noise standard deviation.
    pub fn scaled_channel(&self) -> ComplexMatrix {
        match self {
            Eavesdropper::Single { h, sigma2 } => {
                let s = 1.0 / sigma2.sqrt();
                ComplexMatrix::column(&h.iter().map(|z| z * s).collect::<Vec<_>>())
            }
            Eavesdropper::Multi { h, sigma2 } => {
                ComplexMatrix::from_fn(h.rows(), h.cols(), |r, c| h[(r, c)] / sigma2[c].sqrt())
            }
        }
    }
}

/// A wiretap instance: main channel `H_s` (`N x M`), eavesdroppers and power budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecrecyProblem {
    hs: ComplexMatrix,
    eavesdroppers: Vec<Eavesdropper>,
    power: f64,
}

impl SecrecyProblem {
    pub fn new(hs: ComplexMatrix, eavesdroppers: Vec<Eavesdropper>, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power budget must be positive, got {power}"
            )));
        }
        if eavesdroppers.is_empty() {
            return Err(Error::InvalidParameter("at least one eavesdropper is required".into()));
        }
        let n = hs.rows();
        let single = matches!(eavesdroppers[0], Eavesdropper::Single { .. });
        for (i, e) in eavesdroppers.iter().enumerate() {
            if matches!(e, Eavesdropper::Single { .. }) != single {
                return Err(Error::InvalidParameter(
                    "eavesdroppers mix single- and multi-antenna channels".into(),
                ));
            }
            let (rows, noise): (usize, &[f64]) = match e {
                Eavesdropper::Single { h, sigma2 } => (h.len(), std::slice::from_ref(sigma2)),
                Eavesdropper::Multi { h, sigma2 } => {
                    if sigma2.len() != h.cols() {
                        return Err(Error::Dimension(format!(
                            "eavesdropper {i}: {} noise variances for {} antennas",
                            sigma2.len(),
                            h.cols()
                        )));
                    }
                    (h.rows(), sigma2.as_slice())
                }
            };
            if rows != n {
                return Err(Error::Dimension(format!(
                    "eavesdropper {i} has {rows} rows, expected {n}"
                )));
            }
            if noise.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "eavesdropper {i}: noise variance must be positive"
                )));
            }
            if let Eavesdropper::Single { h, .. } = e {
                if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite("eavesdropper channel"));
                }
            }
        }
        Ok(Self {
            hs,
            eavesdroppers,
            power,
        })
    }

    /// Single-antenna eavesdroppers `h_i` with noise variances `sigma2[i]`.
    pub fn single(hs: ComplexMatrix, channels: Vec<Vec<C64>>, sigma2: Vec<f64>, power: f64) -> Result<Self> {
        if channels.len() != sigma2.len() {
            return Err(Error::Dimension(format!(
                "{} noise variances for {} eavesdroppers",
                sigma2.len(),
                channels.len()
            )));
        }
        let eav = channels
            .into_iter()
            .zip(sigma2)
            .map(|(h, sigma2)| Eavesdropper::Single { h, sigma2 })
            .collect();
        Self::new(hs, eav, power)
    }

    /// Multi-antenna eavesdroppers with per-antenna noise variances.
    pub fn multi(hs: ComplexMatrix, channels: Vec<ComplexMatrix>, sigma2: Vec<Vec<f64>>, power: f64) -> Result<Self> {
        if channels.len() != sigma2.len() {
            return Err(Error::Dimension(format!(
                "{} noise lists for {} eavesdroppers",
                sigma2.len(),
                channels.len()
            )));
        }
        let eav = channels
            .into_iter()
            .zip(sigma2)
            .map(|(h, sigma2)| Eavesdropper::Multi { h, sigma2 })
            .collect();
        Self::new(hs, eav, power)
    }

    pub fn hs(&self) -> &ComplexMatrix {
        &self.hs
    }

    pub fn eavesdroppers(&self) -> &[Eavesdropper] {
        &self.eavesdroppers
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn tx_antennas(&self) -> usize {
        self.hs.rows()
    }

    pub fn num_eavesdroppers(&self) -> usize {
        self.eavesdroppers.len()
    }

    pub fn is_single_antenna(&self) -> bool {
        matches!(self.eavesdroppers[0], Eavesdropper::Single { .. })
    }

    /// Largest eavesdropper antenna count.
    pub fn max_eavesdropper_antennas(&self) -> usize {
        self.eavesdroppers.iter().map(Eavesdropper::antennas).max().unwrap_or(0)
    }

    /// Noise-normalised eavesdropper channels.
    pub fn scaled_channels(&self) -> Vec<ComplexMatrix> {
        self.eavesdroppers.iter().map(Eavesdropper::scaled_channel).collect()
    }

    /// Single-antenna problem with one eavesdropper per antenna `h_{i,j}`.
    pub fn column_expansion(&self) -> SecrecyProblem {
        let mut eav = Vec::new();
        for e in &self.eavesdroppers {
            match e {
                Eavesdropper::Single { .. } => eav.push(e.clone()),
                Eavesdropper::Multi { h, sigma2 } => {
                    for (c, &s) in sigma2.iter().enumerate() {
                        eav.push(Eavesdropper::Single { h: h.col(c), sigma2: s });
                    }
                }
            }
        }
        SecrecyProblem {
            hs: self.hs.clone(),
            eavesdroppers: eav,
            power: self.power,
        }
    }

    pub(crate) fn check_covariance(&self, s: &PsdMatrix) -> Result<()> {
        if s.dim() != self.tx_antennas() {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, expected {}",
                s.dim(),
                s.dim(),
                self.tx_antennas()
            )));
        }
        Ok(())
    }
}

/// Leakage `ln det(I + H̃_i^H S H̃_i)` to every eavesdropper, `H̃_i` noise-normalised.
pub fn leakages(s: &PsdMatrix, p: &SecrecyProblem) -> Result<Vec<f64>> {
    p.check_covariance(s)?;
    p.eavesdroppers
        .iter()
        .map(|e| logdet_capacity(&e.scaled_channel(), s))
        .collect()
}

/// `min_i [ln det(I + H_s^H S H_s) − leakage_i]` in nats; negative for a poor `S`.
pub fn secrecy_rate(s: &PsdMatrix, p: &SecrecyProblem) -> Result<f64> {
    let main = logdet_capacity(&p.hs, s)?;
    Ok(leakages(s, p)?
        .into_iter()
        .map(|l| main - l)
        .fold(f64::INFINITY, f64::min))
}

/// Indices of the eavesdroppers whose rate is within [`TIE_TOL`] of the minimum.
pub fn binding_eavesdroppers(s: &PsdMatrix, p: &SecrecyProblem) -> Result<Vec<usize>> {
    let leak = leakages(s, p)?;
    let worst = leak.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((0..leak.len()).filter(|&i| leak[i] >= worst - TIE_TOL).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SecrecyStatus {
    Converged,
    /// A level test ran out of budget after its retry. The rate is achieved by
    /// the returned covariance and `[t_star, t_upper]` still holds the
    /// optimum, but the bracket is wider than requested.
    Indeterminate,
}

#[derive(Clone, Debug)]
pub struct SecrecySolution {
    pub covariance: PsdMatrix,
    pub secrecy_rate: f64,
    /// Certified level `t` (determinant-ratio scale) reached by the bisection.
    pub t_star: f64,
    /// Upper end of the final bracket; the optimum lies in `[t_star, t_upper]`.
    pub t_upper: f64,
    /// `h_i^H S h_i` for single-antenna eavesdroppers; `tr(H_i^H S H_i)` with
    /// noise-normalised channels for multi-antenna ones.
    pub gamma_star: Vec<f64>,
    pub per_eav_leakage: Vec<f64>,
    pub binding: Vec<usize>,
    /// Capacity problems solved.
    pub iterations: usize,
    pub bisection_steps: usize,
    pub status: SecrecyStatus,
    /// `λ₂/λ₁` of the covariance (reported by the MISO solver).
    pub eigen_ratio: Option<f64>,
}

impl SecrecySolution {
    pub(crate) fn assemble(
        p: &SecrecyProblem,
        covariance: PsdMatrix,
        log_t: (f64, f64),
        iterations: usize,
        bisection_steps: usize,
        status: SecrecyStatus,
    ) -> Result<Self> {
        let leak = leakages(&covariance, p)?;
        let main = logdet_capacity(&p.hs, &covariance)?;
        let secrecy_rate = leak.iter().map(|l| main - l).fold(f64::INFINITY, f64::min);
        let gamma_star = p
            .eavesdroppers
            .iter()
            .map(|e| match e {
                Eavesdropper::Single { h, .. } => covariance.as_matrix().quad_form(h),
                Eavesdropper::Multi { .. } => covariance.received_power(&e.scaled_channel()),
            })
            .collect();
        let worst = leak.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let binding = (0..leak.len()).filter(|&i| leak[i] >= worst - TIE_TOL).collect();
        Ok(Self {
            covariance,
            secrecy_rate,
            t_star: log_t.0.exp(),
            t_upper: log_t.1.exp(),
            gamma_star,
            per_eav_leakage: leak,
            binding,
            iterations,
            bisection_steps,
            status,
            eigen_ratio: None,
        })
    }
}

pub(crate) fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bisection tolerance must be positive, got {eps}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn scalar(hs2: f64, he2: f64, sigma2: f64, power: f64) -> SecrecyProblem {
        SecrecyProblem::single(
            ComplexMatrix::column(&[c(hs2.sqrt())]),
            vec![vec![c(he2.sqrt())]],
            vec![sigma2],
            power,
        )
        .unwrap()
    }

    #[test]
    fn zero_covariance_has_zero_rate() {
        let p = scalar(2.0, 1.0, 1.0, 10.0);
        assert_eq!(secrecy_rate(&PsdMatrix::zeros(1), &p).unwrap(), 0.0);
    }

    #[test]
    fn scalar_rate() {
        let p = scalar(2.0, 1.0, 1.0, 10.0);
        let s = PsdMatrix::from_matrix(ComplexMatrix::identity(1)).unwrap();
        let r = secrecy_rate(&s, &p).unwrap();
        assert!((r - (3f64.ln() - 2f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn rejects_mixed_modes() {
        let hs = ComplexMatrix::identity(2);
        let eav = vec![
            Eavesdropper::Single {
                h: vec![c(1.0), c(0.0)],
                sigma2: 1.0,
            },
            Eavesdropper::Multi {
                h: ComplexMatrix::identity(2),
                sigma2: vec![1.0, 1.0],
            },
        ];
        assert!(SecrecyProblem::new(hs.clone(), eav, 1.0).is_err());
        assert!(SecrecyProblem::new(hs.clone(), vec![], 1.0).is_err());
        assert!(SecrecyProblem::single(hs, vec![vec![c(1.0)]], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn column_expansion_keeps_noise() {
        let h = ComplexMatrix::from_fn(2, 2, |r, c_| c((r + 2 * c_) as f64));
        let p = SecrecyProblem::multi(ComplexMatrix::identity(2), vec![h.clone()], vec![vec![1.0, 4.0]], 1.0).unwrap();
        let q = p.column_expansion();
        assert_eq!(q.num_eavesdroppers(), 2);
        assert!(q.is_single_antenna());
        let s = PsdMatrix::from_matrix(ComplexMatrix::identity(2)).unwrap();
        // the trace leakage of the expanded problem splits across columns
        let split: f64 = q.scaled_channels().iter().map(|g| s.received_power(g)).sum();
        assert!((split - s.received_power(&p.scaled_channels()[0])).abs() < 1e-12);
    }
}
