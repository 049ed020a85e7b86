//! Small real dense helpers for the multiplier searches.

/// Solves `(H + τI) x = b` for a symmetric `m x m` matrix `H` (row-major),
/// raising `τ` from zero until the shifted matrix is positive definite.
pub(crate) fn solve_damped_spd(h: &[f64], b: &[f64], m: usize) -> Option<Vec<f64>> {
    let scale = (0..m).map(|i| h[i * m + i].abs()).fold(0.0, f64::max).max(1e-300);
    let mut tau = 0.0;
    for _ in 0..40 {
        if let Some(l) = cholesky_shifted(h, m, tau, 1e-14 * scale) {
            let mut z = b.to_vec();
            for i in 0..m {
                for k in 0..i {
                    z[i] -= l[i * m + k] * z[k];
                }
                z[i] /= l[i * m + i];
            }
            for i in (0..m).rev() {
                for k in (i + 1)..m {
                    z[i] -= l[k * m + i] * z[k];
                }
                z[i] /= l[i * m + i];
            }
            return Some(z);
        }
        tau = if tau == 0.0 { 1e-8 * scale } else { tau * 10.0 };
    }
    None
}

fn cholesky_shifted(h: &[f64], m: usize, tau: f64, min_pivot: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let mut sum = h[i * m + j] + if i == j { tau } else { 0.0 };
            for k in 0..j {
                sum -= l[i * m + k] * l[j * m + k];
            }
            if i == j {
                if !(sum > min_pivot) {
                    return None;
                }
                l[i * m + i] = sum.sqrt();
            } else {
                l[i * m + j] = sum / l[j * m + j];
            }
        }
    }
    Some(l)
}

/// Euclidean projection of `x` onto `{w >= 0, Σ w <= cap}`.
pub(crate) fn project_capped_simplex(x: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    // w = max(0, x − θ) with θ chosen so the sum is exactly cap
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - cap) / (k + 1) as f64;
        if k + 1 == sorted.len() || sorted[k + 1] <= t {
            theta = t;
            break;
        }
    }
    x.iter().map(|v| (v - theta).max(0.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn damped_solve_spd_and_indefinite() {
        let x = solve_damped_spd(&[4.0, 1.0, 1.0, 3.0], &[1.0, 2.0], 2).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-14);
        // indefinite input gets shifted, and the step still points along b
        let y = solve_damped_spd(&[1.0, 0.0, 0.0, -1.0], &[1.0, 1.0], 2).unwrap();
        assert!(y[0] > 0.0 && y[1] > 0.0);
    }

    #[test]
    fn capped_simplex() {
        assert_eq!(project_capped_simplex(&[0.2, -1.0, 0.3], 1.0), vec![0.2, 0.0, 0.3]);
        let w = project_capped_simplex(&[2.0, 1.0, -3.0], 2.0);
        assert!((w[0] - 1.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15 && w[2] == 0.0);
        let w = project_capped_simplex(&[5.0, 0.0], 1.0);
        assert_eq!(w, vec![1.0, 0.0]);
    }
}
