use serde::{Deserialize, Serialize};

use super::algorithm1::{algorithm1, bisect_level, unconstrained};
use super::feasibility::{active_columns, Landscape, Leakage};
use super::{check_eps, secrecy_rate, SecrecyProblem};
use crate::cr::CrChannels;
use crate::error::{Error, Result};
use crate::linalg::PsdMatrix;

/// Bounds on the secrecy capacity with multi-antenna eavesdroppers, in nats.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsResult {
    pub lower_bound: f64,
    /// Secrecy rate (log-det leakage) actually achieved by `s_lower`.
    pub achievable_rate: f64,
    pub upper_bound: f64,
    pub s_lower: PsdMatrix,
    /// Sum of the two bisection tolerances.
    pub eps_total: f64,
}

fn require_matrix_mode(p: &SecrecyProblem) -> Result<()> {
    if p.is_single_antenna() {
        return Err(Error::InvalidParameter(
            "bounds need multi-antenna eavesdroppers".into(),
        ));
    }
    Ok(())
}

/// Lower bound from `ln det(I + H̃^H S H̃) <= L ln(1 + tr(H̃^H S H̃)/L)`,
/// `L = min(N_e, N)`: maximises `min_i g̃(Γ)/(1 + Γ_i/L)^L` with trace
/// interference constraints. Returns the certified level and its covariance.
pub fn lower_bound_multiantenna(p: &SecrecyProblem, eps_rate: f64) -> Result<(f64, PsdMatrix)> {
    check_eps(eps_rate)?;
    require_matrix_mode(p)?;
    let (cols, _) = active_columns(p);
    if cols.is_empty() {
        let sol = unconstrained(p)?;
        return Ok((sol.secrecy_rate, sol.covariance));
    }
    let l = p.max_eavesdropper_antennas().min(p.tx_antennas());
    let leakage = if l <= 1 {
        Leakage::Linear
    } else {
        Leakage::Power(l as f64)
    };
    let channels = CrChannels::new(p.hs().clone(), cols, p.power())?;
    let mut land = Landscape::new(channels, leakage)?;
    let search = bisect_level(&mut land, eps_rate)?;
    let s = land.points[search.best].solution.covariance.clone();
    Ok((search.log_lo, s))
}

/// Upper bound: every eavesdropper antenna decodes on its own, i.e. the
/// single-antenna problem over all columns `h_{i,j}`.
pub fn upper_bound_multiantenna(p: &SecrecyProblem, eps_rate: f64) -> Result<f64> {
    require_matrix_mode(p)?;
    Ok(algorithm1(&p.column_expansion(), eps_rate)?.secrecy_rate)
}

pub fn bounds(p: &SecrecyProblem, eps_rate: f64) -> Result<BoundsResult> {
    let (lower_bound, s_lower) = lower_bound_multiantenna(p, eps_rate)?;
    let achievable_rate = secrecy_rate(&s_lower, p)?;
    let upper_bound = upper_bound_multiantenna(p, eps_rate)?;
    Ok(BoundsResult {
        lower_bound,
        achievable_rate,
        upper_bound,
        s_lower,
        eps_total: 2.0 * eps_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, C64};

    #[test]
    fn single_column_matches_algorithm1() {
        let hs = ComplexMatrix::from_fn(2, 2, |r, c| C64::new((r + 2 * c) as f64 * 0.3 + 0.2, 0.1 * r as f64));
        let h = ComplexMatrix::column(&[C64::new(0.4, 0.2), C64::new(-0.7, 0.0)]);
        let multi = SecrecyProblem::multi(hs.clone(), vec![h.clone()], vec![vec![1.0]], 3.0).unwrap();
        let single = SecrecyProblem::single(hs, vec![h.col(0)], vec![1.0], 3.0).unwrap();
        let b = bounds(&multi, 1e-4).unwrap();
        let a1 = algorithm1(&single, 1e-4).unwrap().secrecy_rate;
        assert!((b.lower_bound - a1).abs() <= 2e-4);
        assert!((b.achievable_rate - a1).abs() <= 2e-4);
        assert!(b.upper_bound >= b.achievable_rate - b.eps_total);
    }

    #[test]
    fn rejects_single_antenna_mode() {
        let p = SecrecyProblem::single(
            ComplexMatrix::identity(2),
            vec![vec![C64::new(1.0, 0.0); 2]],
            vec![1.0],
            1.0,
        )
        .unwrap();
        assert!(bounds(&p, 1e-3).is_err());
    }
}
