/// Maximiser of `Σ ln(1 + g_k p_k) − Σ p_k` over `p >= 0`: `p_k = max(0, 1 − 1/g_k)`.
pub fn penalized_waterfill(gains: &[f64]) -> Vec<f64> {
    gains
        .iter()
        .map(|&g| if g > 1.0 { 1.0 - 1.0 / g } else { 0.0 })
        .collect()
}

pub fn penalized_waterfill_objective(gains: &[f64], powers: &[f64]) -> f64 {
    gains.iter().zip(powers).map(|(&g, &p)| (g * p).ln_1p() - p).sum()
}

/// Classic budgeted water-filling: maximises `Σ ln(1 + g_k p_k)` subject to
/// `Σ p_k <= budget`. The water level is found by bisection so the budget is met
/// to a relative 1e-12.
pub fn budgeted_waterfill(gains: &[f64], budget: f64) -> Vec<f64> {
    let positive = gains.iter().any(|&g| g > 0.0);
    if !positive || budget <= 0.0 {
        return vec![0.0; gains.len()];
    }
    let alloc = |level: f64| -> Vec<f64> {
        gains
            .iter()
            .map(|&g| if g > 0.0 { (level - 1.0 / g).max(0.0) } else { 0.0 })
            .collect()
    };
    let best = gains.iter().cloned().fold(0.0, f64::max);
    let mut lo = 1.0 / best;
    let mut hi = lo + budget;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let used: f64 = alloc(mid).iter().sum();
        if used > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut p = alloc(lo);
    // absorb the last bisection residual into the active channels
    let used: f64 = p.iter().sum();
    let active = p.iter().filter(|&&x| x > 0.0).count();
    if active > 0 && used < budget {
        let extra = (budget - used) / active as f64;
        for x in p.iter_mut().filter(|x| **x > 0.0) {
            *x += extra;
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalized_examples() {
        assert_eq!(penalized_waterfill(&[0.5]), vec![0.0]);
        assert_eq!(penalized_waterfill(&[2.0]), vec![0.5]);
        assert_eq!(penalized_waterfill(&[4.0, 1.0, 0.25]), vec![0.75, 0.0, 0.0]);
    }

    #[test]
    fn penalized_is_locally_optimal() {
        // Single-coordinate ±1e-3 perturbations, clipped to p >= 0, never improve.
        let g = [4.0, 1.0, 0.25];
        let p = penalized_waterfill(&g);
        let base = penalized_waterfill_objective(&g, &p);
        for k in 0..3 {
            for d in [-1e-3, 1e-3] {
                let mut q = p.clone();
                q[k] = (q[k] + d).max(0.0);
                assert!(penalized_waterfill_objective(&g, &q) <= base + 1e-15);
            }
        }
    }

    #[test]
    fn stationarity() {
        let g = [3.0, 0.7, 10.0, 1.0];
        let p = penalized_waterfill(&g);
        for (gk, pk) in g.iter().zip(&p) {
            let slope = gk / (1.0 + gk * pk);
            if *pk > 0.0 {
                assert!((slope - 1.0).abs() < 1e-14);
            } else {
                assert!(slope <= 1.0);
            }
        }
    }

    #[test]
    fn budgeted_meets_budget() {
        let p = budgeted_waterfill(&[2.0, 1.0, 0.1], 3.0);
        assert!((p.iter().sum::<f64>() - 3.0).abs() < 1e-9 * 3.0);
        // equal water level on the active channels
        let level0 = p[0] + 0.5;
        let level1 = p[1] + 1.0;
        assert!((level0 - level1).abs() < 1e-9);
        assert_eq!(p[2], 0.0);
        assert_eq!(budgeted_waterfill(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }
}
