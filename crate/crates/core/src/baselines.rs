//! Reference solvers used to validate the main algorithms: the P-SVD
//! zero-forcing baseline, brute-force projected-gradient solvers for small
//! instances, and finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::cscg_matrix;
use crate::cr::CrProblem;
use crate::error::Result;
use crate::linalg::{budgeted_waterfill, eigh, logdet_capacity, ComplexMatrix, HermitianMatrix, PsdMatrix, C64};
use crate::secrecy::{secrecy_rate, SecrecyProblem};

/// Columns below this fraction of the strongest direction count as rank deficient.
const RANK_TOL: f64 = 1e-10;
const DYKSTRA_ITERATIONS: usize = 5000;
const POLISH_ITERATIONS: usize = 300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    /// Start at `initial`, halve until the objective improves, double after a success.
    Backtracking { initial: f64 },
    /// `initial / sqrt(k + 1)`, keeping the best iterate.
    Diminishing { initial: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            max_iters: 500,
            step_rule: StepRule::Backtracking { initial: 1.0 },
            seed: 0,
        }
    }
}

/// P-SVD: null every eavesdropper by restricting `S` to the orthogonal
/// complement of all (noise-scaled) eavesdropper columns, then water-fill.
/// Returns the covariance and its secrecy rate (zero when nothing is left).
pub fn p_svd_rate(p: &SecrecyProblem) -> Result<(PsdMatrix, f64)> {
    let n = p.tx_antennas();
    let channels = p.scaled_channels();
    let cols: usize = channels.iter().map(|g| g.cols()).sum();
    let mut stacked = ComplexMatrix::zeros(n, cols);
    let mut at = 0;
    for g in &channels {
        for c in 0..g.cols() {
            for r in 0..n {
                stacked[(r, at)] = g[(r, c)];
            }
            at += 1;
        }
    }
    let Some(q) = stacked.orthogonal_complement(RANK_TOL) else {
        return Ok((PsdMatrix::zeros(n), 0.0));
    };
    let projected = q.adjoint_mul(p.hs());
    let eig = eigh(&HermitianMatrix::from_matrix_unchecked(
        projected.mul_adjoint(&projected).hermitian_part(),
    ));
    let gains: Vec<f64> = eig.eigenvalues.iter().map(|g| g.max(0.0)).collect();
    let powers = budgeted_waterfill(&gains, p.power());
    let inner = eig.reconstruct_with_weights(&powers);
    let s = (&(&q * &inner) * &q.adjoint()).hermitian_part();
    let s = PsdMatrix::project(&HermitianMatrix::from_matrix_unchecked(s));
    let rate = secrecy_rate(&s, p)?;
    Ok((s, rate))
}

/// `∇_S ln det(I + H^H S H) = H (I + H^H S H)^{-1} H^H`.
fn logdet_gradient(h: &ComplexMatrix, s: &ComplexMatrix) -> ComplexMatrix {
    let m = h.cols();
    let mut inner = h.adjoint_mul(&(s * h));
    for k in 0..m {
        inner[(k, k)] += C64::new(1.0, 0.0);
    }
    let eig = eigh(&HermitianMatrix::from_matrix_unchecked(inner.hermitian_part()));
    let inv = eig.reconstruct_with(|l| 1.0 / l.max(1e-300));
    (&(h * &inv) * &h.adjoint()).hermitian_part()
}

fn frobenius_dot(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

/// Min-norm point of the convex hull of `dirs` (Frank-Wolfe on the simplex weights).
fn min_norm_combination(dirs: &[ComplexMatrix]) -> ComplexMatrix {
    let k = dirs.len();
    let gram: Vec<Vec<f64>> = dirs
        .iter()
        .map(|a| dirs.iter().map(|b| frobenius_dot(a, b)).collect())
        .collect();
    let mut w = vec![1.0 / k as f64; k];
    for _ in 0..100 {
        let grad: Vec<f64> = (0..k).map(|i| (0..k).map(|j| gram[i][j] * w[j]).sum()).collect();
        let vertex = (0..k).min_by(|&a, &b| grad[a].total_cmp(&grad[b])).unwrap();
        // exact line search toward the vertex
        let ww: f64 = (0..k).map(|i| w[i] * grad[i]).sum();
        let wv = grad[vertex];
        let vv = gram[vertex][vertex];
        let denom = ww - 2.0 * wv + vv;
        if denom <= 0.0 || ww - wv <= 1e-15 * (1.0 + ww.abs()) {
            break;
        }
        let step = ((ww - wv) / denom).clamp(0.0, 1.0);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= 1.0 - step;
            if i == vertex {
                *wi += step;
            }
        }
    }
    let mut out = dirs[0].scale(w[0]);
    for i in 1..k {
        out = &out + &dirs[i].scale(w[i]);
    }
    out
}

/// Multi-start projected supergradient ascent of the secrecy rate over
/// `{S ⪰ 0, tr S <= P}`. Start 0 is `S = 0`, start 1 is `(P/N) I`, the rest are
/// random (seeded). The ascent direction is the min-norm combination of the
/// rate gradients of the eavesdroppers within a band of the minimum; the band
/// narrows from `1e-2` (relative) whenever the ascent stalls. Each restart
/// ends with a smoothed ascent from where it stopped.
/// A lower-bound oracle: returns the best rate seen.
pub fn brute_force_secrecy(p: &SecrecyProblem, cfg: &OracleConfig) -> Result<f64> {
    let n = p.tx_antennas();
    let power = p.power();
    let eav = p.scaled_channels();
    let rates = |s: &PsdMatrix| -> Result<Vec<f64>> {
        let main = logdet_capacity(p.hs(), s)?;
        eav.iter().map(|g| Ok(main - logdet_capacity(g, s)?)).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best = f64::NEG_INFINITY;
    for restart in 0..cfg.restarts.max(1) {
        let mut s = match restart {
            0 => PsdMatrix::zeros(n),
            1 => PsdMatrix::from_gram_unchecked(ComplexMatrix::identity(n).scale(power / n as f64)),
            _ => {
                let w = cscg_matrix(&mut rng, n, n);
                let g = w.mul_adjoint(&w);
                let tr = g.trace().re.max(f64::MIN_POSITIVE);
                PsdMatrix::from_gram_unchecked(g.hermitian_part().scale(power / tr))
            }
        };
        let mut r = rates(&s)?;
        let mut value = r.iter().cloned().fold(f64::INFINITY, f64::min);
        best = best.max(value);
        let mut step = match cfg.step_rule {
            StepRule::Backtracking { initial } | StepRule::Diminishing { initial } => initial,
        };
        // ε-ascent: rates within `band` of the minimum count as active; the band
        // shrinks whenever no step along the min-norm direction improves
        let mut band = 1e-2;
        for it in 0..cfg.max_iters {
            let main_grad = logdet_gradient(p.hs(), s.as_matrix());
            let dirs: Vec<ComplexMatrix> = (0..eav.len())
                .filter(|&i| r[i] <= value + band * (1.0 + value.abs()))
                .map(|i| &main_grad - &logdet_gradient(&eav[i], s.as_matrix()))
                .collect();
            let dir = min_norm_combination(&dirs);
            let project = |eta: f64| {
                let trial = (s.as_matrix() + &dir.scale(eta)).hermitian_part();
                PsdMatrix::project_budget(&HermitianMatrix::from_matrix_unchecked(trial), power)
            };
            match cfg.step_rule {
                StepRule::Backtracking { .. } => {
                    let mut moved = false;
                    while step > 1e-12 {
                        let next = project(step);
                        let nr = rates(&next)?;
                        let nv = nr.iter().cloned().fold(f64::INFINITY, f64::min);
                        if nv > value {
                            s = next;
                            r = nr;
                            value = nv;
                            step *= 2.0;
                            moved = true;
                            break;
                        }
                        step *= 0.5;
                    }
                    if !moved {
                        if band <= 1e-9 {
                            break;
                        }
                        band *= 0.1;
                        step = match cfg.step_rule {
                            StepRule::Backtracking { initial } | StepRule::Diminishing { initial } => initial,
                        };
                    }
                }
                StepRule::Diminishing { initial } => {
                    s = project(initial / ((it + 1) as f64).sqrt());
                    r = rates(&s)?;
                    value = r.iter().cloned().fold(f64::INFINITY, f64::min);
                }
            }
            best = best.max(value);
        }
        best = best.max(polish(p, &eav, &s, cfg.max_iters.min(POLISH_ITERATIONS))?);
    }
    Ok(best)
}

/// Ascent of a soft minimum of the rates in the factor `S = P A A^H / (‖A‖² + a₀²)`,
/// which is smooth and unconstrained; the temperature drops tenfold per stage.
/// `iterations` caps each stage.
/// Returns the best true minimum seen.
fn polish(p: &SecrecyProblem, eav: &[ComplexMatrix], start: &PsdMatrix, iterations: usize) -> Result<f64> {
    let power = p.power();
    let build = |a: &ComplexMatrix, a0: f64| {
        let den = a.frobenius_norm().powi(2) + a0 * a0;
        PsdMatrix::from_gram_unchecked(
            a.mul_adjoint(a)
                .hermitian_part()
                .scale(power / den.max(f64::MIN_POSITIVE)),
        )
    };
    let rates = |s: &PsdMatrix| -> Result<Vec<f64>> {
        let main = logdet_capacity(p.hs(), s)?;
        eav.iter().map(|g| Ok(main - logdet_capacity(g, s)?)).collect()
    };
    let soft = |r: &[f64], tau: f64| {
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        lo - tau * r.iter().map(|x| (-(x - lo) / tau).exp()).sum::<f64>().ln()
    };
    let root = eigh(start.hermitian()).reconstruct_with(|l| (l.max(0.0) / power).sqrt());
    let mut a = root;
    let mut a0 = (1.0 - start.trace() / power).max(0.0).sqrt() + 1e-6;
    let mut s = build(&a, a0);
    let mut r = rates(&s)?;
    let mut best = r.iter().cloned().fold(f64::INFINITY, f64::min);
    for tau in [1e-2, 1e-3, 1e-4, 1e-5] {
        let mut value = soft(&r, tau);
        let mut step = 1.0;
        for _ in 0..iterations {
            let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = r.iter().map(|x| (-(x - lo) / tau).exp()).collect();
            let total: f64 = w.iter().sum();
            let main_grad = logdet_gradient(p.hs(), s.as_matrix());
            let mut g = main_grad.scale(0.0);
            for (wi, e) in w.iter().zip(eav) {
                g = &g + &(&main_grad - &logdet_gradient(e, s.as_matrix())).scale(wi / total);
            }
            let den = a.frobenius_norm().powi(2) + a0 * a0;
            let c = power / den;
            let q = frobenius_dot(&g, s.as_matrix()) / c;
            let ga = &(&g * &a).scale(2.0 * c) - &a.scale(2.0 * c * q / den);
            let g0 = -2.0 * c * q * a0 / den;
            let mut moved = false;
            while step > 1e-14 {
                let na = &a + &ga.scale(step);
                let n0 = a0 + step * g0;
                let ns = build(&na, n0);
                let nr = rates(&ns)?;
                let nv = soft(&nr, tau);
                if nv > value {
                    a = na;
                    a0 = n0;
                    s = ns;
                    r = nr;
                    value = nv;
                    step *= 2.0;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            best = best.max(r.iter().cloned().fold(f64::INFINITY, f64::min));
            if !moved {
                break;
            }
        }
    }
    Ok(best)
}

/// Halfspace `⟨S, Q⟩ <= b` in the Frobenius geometry of Hermitian matrices.
struct HalfSpace {
    q: ComplexMatrix,
    b: f64,
    norm2: f64,
}

impl HalfSpace {
    fn project(&self, s: &ComplexMatrix) -> ComplexMatrix {
        let excess = frobenius_dot(&self.q, s) - self.b;
        if excess <= 0.0 || self.norm2 == 0.0 {
            s.clone()
        } else {
            s - &self.q.scale(excess / self.norm2)
        }
    }
}

/// Dykstra's alternating projections onto the halfspaces, PSD cone last.
fn dykstra(s: &ComplexMatrix, sets: &[HalfSpace]) -> PsdMatrix {
    let n = s.rows();
    let mut x = s.clone();
    let mut corrections = vec![ComplexMatrix::zeros(n, n); sets.len() + 1];
    let mut out = PsdMatrix::zeros(n);
    for _ in 0..DYKSTRA_ITERATIONS {
        let before = x.clone();
        for (k, set) in sets.iter().enumerate() {
            let y = &x + &corrections[k];
            let z = set.project(&y);
            corrections[k] = &y - &z;
            x = z;
        }
        let y = &x + &corrections[sets.len()];
        out = PsdMatrix::project(&HermitianMatrix::from_matrix_unchecked(y.hermitian_part()));
        corrections[sets.len()] = &y - out.as_matrix();
        x = out.as_matrix().clone();
        if (&x - &before).frobenius_norm() <= 1e-14 * (1.0 + x.frobenius_norm()) {
            break;
        }
    }
    out
}

/// Projected gradient ascent of the spectrum-sharing objective with Dykstra projections
/// onto `{tr S <= P} ∩ {tr(G_i^H S G_i) <= Γ_i} ∩ PSD`. Each projected iterate
/// is shrunk into exact feasibility before it is scored. Returns the capacity.
pub fn brute_force_pa(p: &CrProblem, cfg: &OracleConfig) -> Result<f64> {
    let ch = &p.channels;
    let n = ch.tx_antennas();
    let power = ch.power();
    let mut sets = vec![HalfSpace {
        q: ComplexMatrix::identity(n),
        b: power,
        norm2: n as f64,
    }];
    for (g, &limit) in ch.interference().iter().zip(&p.limits) {
        if limit.is_finite() {
            let q = g.mul_adjoint(g).hermitian_part();
            let norm2 = frobenius_dot(&q, &q);
            sets.push(HalfSpace { q, b: limit, norm2 });
        }
    }
    let feasible = |s: PsdMatrix| -> PsdMatrix {
        let mut c: f64 = 1.0;
        for set in &sets {
            let used = frobenius_dot(&set.q, s.as_matrix());
            if used > set.b {
                c = c.min(set.b / used);
            }
        }
        s.scaled(c.max(0.0))
    };
    let score = |s: &PsdMatrix| logdet_capacity(ch.hs(), s);

    let mut s = PsdMatrix::zeros(n);
    let mut value = 0.0;
    let mut step = match cfg.step_rule {
        StepRule::Backtracking { initial } | StepRule::Diminishing { initial } => initial,
    };
    let mut best = value;
    for it in 0..cfg.max_iters {
        let grad = logdet_gradient(ch.hs(), s.as_matrix());
        let project = |eta: f64| feasible(dykstra(&(s.as_matrix() + &grad.scale(eta)), &sets));
        match cfg.step_rule {
            StepRule::Backtracking { .. } => {
                let mut moved = false;
                while step > 1e-12 {
                    let next = project(step);
                    let v = score(&next)?;
                    if v > value {
                        s = next;
                        value = v;
                        step *= 2.0;
                        moved = true;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            StepRule::Diminishing { initial } => {
                s = project(initial / ((it + 1) as f64).sqrt());
                value = score(&s)?;
            }
        }
        best = f64::max(best, value);
    }
    Ok(best)
}

/// Central differences with step `h`; forward differences for coordinates
/// where `x_i − h < 0`.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            if x[i] - h >= 0.0 {
                y[i] = x[i] + h;
                let up = f(&y);
                y[i] = x[i] - h;
                let down = f(&y);
                y[i] = x[i];
                (up - down) / (2.0 * h)
            } else {
                let base = f(&y);
                y[i] = x[i] + h;
                let up = f(&y);
                y[i] = x[i];
                (up - base) / h
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cr::CrChannels;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn finite_differences_are_exact_on_quadratics() {
        let g = finite_diff_grad(|x| 3.0 * x[0] * x[0] - 2.0 * x[1] + 1.0, &[1.5, 0.0], 1e-3);
        assert!((g[0] - 9.0).abs() < 1e-9);
        assert!((g[1] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_start_without_iterations_is_zero() {
        let p = SecrecyProblem::single(ComplexMatrix::identity(2), vec![vec![c(1.0), c(0.0)]], vec![1.0], 1.0).unwrap();
        let cfg = OracleConfig {
            restarts: 1,
            max_iters: 0,
            ..OracleConfig::default()
        };
        assert_eq!(brute_force_secrecy(&p, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn brute_pa_scalar() {
        let ch = CrChannels::single_antenna(ComplexMatrix::column(&[c(1.0)]), &[vec![c(1.0)]], 10.0).unwrap();
        let v = brute_force_pa(&CrProblem::new(ch, vec![1.0]).unwrap(), &OracleConfig::default()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-6, "{v}");
    }

    #[test]
    fn psvd_full_span_is_zero() {
        let p = SecrecyProblem::single(
            ComplexMatrix::identity(2),
            vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]],
            vec![1.0, 1.0],
            5.0,
        )
        .unwrap();
        let (s, r) = p_svd_rate(&p).unwrap();
        assert_eq!(r, 0.0);
        assert_eq!(s.trace(), 0.0);
    }
}
