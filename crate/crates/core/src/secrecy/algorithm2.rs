use super::algorithm1::unconstrained;
use super::feasibility::active_columns;
use super::{check_eps, SecrecyProblem, SecrecySolution, SecrecyStatus};
use crate::cr::{CrChannels, CrSolution, EVAL_TOL};
use crate::error::{Error, Result};

const MAX_STEPS: usize = 200;

/// Secrecy capacity with one single-antenna eavesdropper.
///
/// `F(Γ) = g(Γ)/(1 + Γ)` (noise-normalised channel) is unimodal, and
/// `γ(Γ)(1 + Γ) − g(Γ)` is non-increasing because `γ = g'` is. Its sign at the
/// midpoint tells which half holds the maximiser, so the search is a plain
/// bisection on `Γ ∈ [0, Γ̄]`, `Γ̄` the leakage of the unconstrained optimum.
///
/// Stops once `[max F(lo), F(hi)] .. g(hi)/(1 + lo)` (in logs) is at most
/// `eps_rate` wide.
pub fn algorithm2(p: &SecrecyProblem, eps_rate: f64) -> Result<SecrecySolution> {
    check_eps(eps_rate)?;
    if !p.is_single_antenna() || p.num_eavesdroppers() != 1 {
        return Err(Error::InvalidParameter(
            "algorithm2 needs exactly one single-antenna eavesdropper".into(),
        ));
    }
    let (cols, _) = active_columns(p);
    if cols.is_empty() {
        return unconstrained(p);
    }
    let ch = CrChannels::new(p.hs().clone(), cols, p.power())?;
    let bar = ch.interference_powers(ch.unconstrained_covariance())[0];
    if bar <= 0.0 {
        return unconstrained(p);
    }

    let floor = 1e-9 * (1.0 + ch.max_interference(0));
    let mut solves = 0;
    let mut solve = |gamma: f64, warm: Option<&CrSolution>| -> Result<CrSolution> {
        solves += 1;
        ch.solve_from(&[gamma], EVAL_TOL, warm)
    };
    let log_f = |gamma: f64, s: &CrSolution| s.capacity - gamma.ln_1p();

    // Γ = 0 is solved exactly (projected); its right derivative comes from the floor
    let zero = solve(0.0, None)?;
    let mut best = (log_f(0.0, &zero), zero.covariance.clone());
    let edge = solve(floor.min(bar), None)?;
    let (mut lo, mut hi) = (0.0f64, bar);
    let mut hi_log_g_upper = ch.unconstrained_capacity();
    let mut warm = edge.clone();
    if edge.dual_mu[0] * (1.0 + floor) <= 1.0 {
        hi = floor.min(bar);
        hi_log_g_upper = edge.capacity + edge.duality_gap.max(0.0);
    }
    if log_f(floor.min(bar), &edge) > best.0 {
        best = (log_f(floor.min(bar), &edge), edge.covariance);
    }

    let mut steps = 0;
    let mut upper = hi_log_g_upper - lo.ln_1p();
    while upper - best.0 > eps_rate && steps < MAX_STEPS && hi - lo > 1e-13 * (1.0 + bar) {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let sol = solve(mid, Some(&warm))?;
        let value = log_f(mid, &sol);
        if sol.dual_mu[0] * (1.0 + mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
            hi_log_g_upper = sol.capacity + sol.duality_gap.max(0.0);
        }
        if value > best.0 {
            best = (value, sol.covariance.clone());
        }
        warm = sol;
        upper = hi_log_g_upper - lo.ln_1p();
    }
    let status = if upper - best.0 <= eps_rate {
        SecrecyStatus::Converged
    } else {
        SecrecyStatus::Indeterminate
    };
    SecrecySolution::assemble(p, best.1, (best.0, upper.max(best.0)), solves, steps, status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ComplexMatrix, C64};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn scalar_full_power() {
        let p = SecrecyProblem::single(
            ComplexMatrix::column(&[c(2f64.sqrt())]),
            vec![vec![c(1.0)]],
            vec![1.0],
            10.0,
        )
        .unwrap();
        let sol = algorithm2(&p, 1e-6).unwrap();
        assert_eq!(sol.status, SecrecyStatus::Converged);
        assert!(
            (sol.secrecy_rate - (21.0f64 / 11.0).ln()).abs() < 2e-6,
            "{}",
            sol.secrecy_rate
        );
    }

    #[test]
    fn rejects_two_eavesdroppers() {
        let p = SecrecyProblem::single(
            ComplexMatrix::identity(2),
            vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]],
            vec![1.0, 1.0],
            1.0,
        )
        .unwrap();
        assert!(algorithm2(&p, 1e-3).is_err());
    }
}
