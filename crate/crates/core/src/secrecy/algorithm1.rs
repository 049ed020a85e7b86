use super::feasibility::{active_columns, solve_budget, Decision, Landscape, Leakage, DEFAULT_WITNESS_TOL};
use super::{check_eps, SecrecyProblem, SecrecySolution, SecrecyStatus};
use crate::cr::CrChannels;
use crate::error::{Error, Result};

const MAX_BISECTION_STEPS: usize = 200;

pub(crate) struct LevelSearch {
    pub log_lo: f64,
    pub log_hi: f64,
    pub best: usize,
    pub steps: usize,
    pub status: SecrecyStatus,
}

/// Bisection on `ln t` over `[ln g(0), ln g(∞)]` until the bracket is at most
/// `eps_rate` wide. The lower end is always the level of an evaluated point and
/// the upper end the largest certified cell bound, so the bracket holds the
/// optimum even when a test runs out of budget (reported in the status).
pub(crate) fn bisect_level(land: &mut Landscape, eps_rate: f64) -> Result<LevelSearch> {
    let k = land.dim();
    let (mut log_lo, mut best) = land.best_level();
    let mut log_hi = land.upper().max(log_lo);
    let mut status = SecrecyStatus::Converged;
    let mut steps = 0;
    while log_hi - log_lo > eps_rate && steps < MAX_BISECTION_STEPS {
        steps += 1;
        let mid = 0.5 * (log_lo + log_hi);
        let mut decision = land.decide(mid, DEFAULT_WITNESS_TOL, eps_rate, solve_budget(k, false))?;
        if matches!(decision, Decision::Indeterminate) {
            land.tighten();
            decision = land.decide(mid, DEFAULT_WITNESS_TOL, eps_rate, solve_budget(k, true))?;
        }
        (log_lo, best) = land.best_level();
        log_hi = land.upper().max(log_lo);
        if matches!(decision, Decision::Indeterminate) {
            break;
        }
    }
    if log_hi - log_lo > eps_rate {
        status = SecrecyStatus::Indeterminate;
    }
    Ok(LevelSearch {
        log_lo,
        log_hi,
        best,
        steps,
        status,
    })
}

/// Secrecy capacity with single-antenna eavesdroppers, by bisection on the
/// level `t` with a certified feasibility test at each step.
///
/// `eps_rate` is the final bracket width in nats: the returned rate is within
/// `eps_rate` of the optimum whenever the status is `Converged`.
pub fn algorithm1(p: &SecrecyProblem, eps_rate: f64) -> Result<SecrecySolution> {
    check_eps(eps_rate)?;
    if !p.is_single_antenna() {
        return Err(Error::InvalidParameter(
            "algorithm1 needs single-antenna eavesdroppers".into(),
        ));
    }
    let (cols, _) = active_columns(p);
    if cols.is_empty() {
        return unconstrained(p);
    }
    let channels = CrChannels::new(p.hs().clone(), cols, p.power())?;
    let mut land = Landscape::new(channels, Leakage::Linear)?;
    let search = bisect_level(&mut land, eps_rate)?;
    let s = land.points[search.best].solution.covariance.clone();
    SecrecySolution::assemble(
        p,
        s,
        (search.log_lo, search.log_hi),
        land.solves(),
        search.steps,
        search.status,
    )
}

/// No eavesdropper receives anything: plain water-filling.
pub(crate) fn unconstrained(p: &SecrecyProblem) -> Result<SecrecySolution> {
    let ch = CrChannels::new(p.hs().clone(), vec![], p.power())?;
    let c = ch.unconstrained_capacity();
    SecrecySolution::assemble(
        p,
        ch.unconstrained_covariance().clone(),
        (c, c),
        1,
        0,
        SecrecyStatus::Converged,
    )
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
        let sol = algorithm1(&p, 1e-6).unwrap();
        assert_eq!(sol.status, SecrecyStatus::Converged);
        assert!(
            (sol.secrecy_rate - (21.0f64 / 11.0).ln()).abs() < 1e-9,
            "{}",
            sol.secrecy_rate
        );
        assert!((sol.t_star.ln() - sol.secrecy_rate).abs() <= 1e-6);
    }

    #[test]
    fn decoupled_eavesdropper() {
        // h_1 is orthogonal to the main channel's column space
        let hs = ComplexMatrix::from_fn(2, 2, |r, _| if r == 0 { c(1.0) } else { c(0.0) });
        let p = SecrecyProblem::single(hs.clone(), vec![vec![c(0.0), c(1.0)]], vec![1.0], 3.0).unwrap();
        let sol = algorithm1(&p, 1e-4).unwrap();
        let free = CrChannels::new(hs, vec![], 3.0).unwrap().unconstrained_capacity();
        assert!((sol.secrecy_rate - free).abs() < 1e-9);
        assert!(sol.per_eav_leakage[0].abs() < 1e-12);
    }

    #[test]
    fn zero_eavesdropper_is_vacuous() {
        let p = SecrecyProblem::single(ComplexMatrix::identity(2), vec![vec![c(0.0), c(0.0)]], vec![1.0], 2.0).unwrap();
        let sol = algorithm1(&p, 1e-4).unwrap();
        assert!((sol.secrecy_rate - 2.0 * 2f64.ln()).abs() < 1e-12);
    }
}
