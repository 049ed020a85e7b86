//! MISO case: `H_s` is a single column `a`, so the
//! objective is `min_i (1 + a^H S a) / (1 + b_i^H S b_i)` with `b_i = h_i/σ_i`.
//!
//! For a level `t` the slacks `s_i(S) = (1 + a^H S a)/t − (1 + b_i^H S b_i)`
//! are linear in `S`, and the dual function has the closed form
//!
//! ```text
//!     φ(ν) = 1/t − 1 + P max(0, λ_max(a a^H / t − Σ ν_i b_i b_i^H)),
//! ```
//!
//! attained by `S = P v v^H` at the top eigenvector. The level test is column
//! generation over those rank-one maximisers: a small LP picks the best
//! convex combination (a witness when its slack is `>= −tol`) and its dual
//! weights `ν`; `φ(ν) < 0` is an infeasibility certificate; otherwise the new
//! maximiser joins the candidate set.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::feasibility::{active_columns, CERTIFICATE_MARGIN, DEFAULT_WITNESS_TOL};
use super::{algorithm1::unconstrained, check_eps, SecrecyProblem, SecrecySolution, SecrecyStatus};
use crate::error::{Error, Result};
use crate::linalg::{eigh, norm_sqr, ComplexMatrix, HermitianMatrix, PsdMatrix, C64};

const MAX_ROUNDS: usize = 300;
const ASCENT_ITERATIONS: usize = 400;
const MAX_BISECTION_STEPS: usize = 200;
/// The bracket is closed at least this far: away from `t*` the feasible
/// covariances need not be rank one, and `λ₂/λ₁` shrinks with the gap.
pub const RANK_GAP: f64 = 1e-6;

struct Candidate {
    /// Unit direction; `None` for `S = 0`.
    v: Option<Vec<C64>>,
    /// `a^H S a`.
    main: f64,
    /// `b_i^H S b_i`.
    leak: Vec<f64>,
}

struct Miso {
    a: Vec<C64>,
    b: Vec<Vec<C64>>,
    power: f64,
    candidates: Vec<Candidate>,
}

enum Test {
    Feasible(PsdMatrix),
    Infeasible(Vec<f64>),
    Indeterminate,
}

impl Miso {
    fn new(a: Vec<C64>, b: Vec<Vec<C64>>, power: f64) -> Self {
        let mut m = Self {
            a,
            b,
            power,
            candidates: Vec::new(),
        };
        m.push(None);
        let dir = normalized(&m.a);
        m.push(dir);
        m
    }

    fn k(&self) -> usize {
        self.b.len()
    }

    fn push(&mut self, v: Option<Vec<C64>>) {
        let (main, leak) = match &v {
            None => (0.0, vec![0.0; self.k()]),
            Some(v) => (
                self.power * inner(&self.a, v).norm_sqr(),
                self.b.iter().map(|b| self.power * inner(b, v).norm_sqr()).collect(),
            ),
        };
        self.candidates.push(Candidate { v, main, leak });
    }

    fn slack(&self, main: f64, leak: f64, log_t: f64) -> f64 {
        (1.0 + main) * (-log_t).exp() - (1.0 + leak)
    }

    fn log_level(main: f64, leak: &[f64]) -> f64 {
        leak.iter()
            .map(|l| main.ln_1p() - l.ln_1p())
            .fold(f64::INFINITY, f64::min)
    }

    /// `t φ_t(ν)`: unnormalised, non-increasing in `t`.
    fn dual_value(&self, nu: &[f64], t: f64) -> (f64, Vec<C64>) {
        let n = self.a.len();
        let mut m = ComplexMatrix::from_fn(n, n, |r, c| self.a[r] * self.a[c].conj());
        for (b, &w) in self.b.iter().zip(nu) {
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] -= b[r] * b[c].conj() * (t * w);
                }
            }
        }
        let eig = eigh(&HermitianMatrix::from_matrix_unchecked(m));
        let top = eig.eigenvalues[0];
        let total: f64 = nu.iter().sum();
        (1.0 - t * total + self.power * top.max(0.0), eig.eigenvectors.col(0))
    }

    fn combine(&self, alpha: &[f64]) -> PsdMatrix {
        let n = self.a.len();
        let mut s = ComplexMatrix::zeros(n, n);
        for (cand, &w) in self.candidates.iter().zip(alpha) {
            if let (Some(v), true) = (&cand.v, w > 0.0) {
                for r in 0..n {
                    for c in 0..n {
                        s[(r, c)] += v[r] * v[c].conj() * (w * self.power);
                    }
                }
            }
        }
        PsdMatrix::from_gram_unchecked(s.hermitian_part())
    }

    /// Best convex combination of the candidates: `(min slack, weights)`.
    fn master_primal(&self, log_t: f64) -> Option<(f64, Vec<f64>)> {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let z = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        let alpha: Vec<_> = self.candidates.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        for i in 0..self.k() {
            let mut row: Vec<_> = self
                .candidates
                .iter()
                .zip(&alpha)
                .map(|(c, &a)| (a, self.slack(c.main, c.leak[i], log_t)))
                .collect();
            row.push((z, -1.0));
            lp.add_constraint(row, ComparisonOp::Ge, 0.0);
        }
        lp.add_constraint(
            alpha.iter().map(|&a| (a, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            1.0,
        );
        let sol = lp.solve().ok()?;
        Some((
            sol.objective(),
            alpha.iter().map(|&a| sol.var_value(a).max(0.0)).collect(),
        ))
    }

    /// Simplex weights minimising the best candidate's weighted slack.
    fn master_dual(&self, log_t: f64) -> Option<Vec<f64>> {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let w = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        let nu: Vec<_> = (0..self.k()).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        for c in &self.candidates {
            let mut row: Vec<_> = nu
                .iter()
                .enumerate()
                .map(|(i, &v)| (v, self.slack(c.main, c.leak[i], log_t)))
                .collect();
            row.push((w, -1.0));
            lp.add_constraint(row, ComparisonOp::Le, 0.0);
        }
        lp.add_constraint(nu.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
        let sol = lp.solve().ok()?;
        let nu: Vec<f64> = nu.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
        let total: f64 = nu.iter().sum();
        Some(nu.iter().map(|v| v / total).collect())
    }

    fn test(&mut self, log_t: f64, tol: f64) -> Result<Test> {
        let t = log_t.exp();
        for _ in 0..MAX_ROUNDS {
            let (z, alpha) = self.master_primal(log_t).ok_or(Error::NotConverged {
                solver: "miso master LP",
                iterations: 0,
                residual: f64::NAN,
            })?;
            if z >= -tol {
                return Ok(Test::Feasible(self.combine(&alpha)));
            }
            let Some(nu) = self.master_dual(log_t) else { break };
            let (value, v) = self.dual_value(&nu, t);
            if value < -CERTIFICATE_MARGIN * t {
                return Ok(Test::Infeasible(nu));
            }
            // the master already matches the dual: nothing left to add
            if value / t - z <= 1e-12 {
                break;
            }
            self.push(Some(v));
        }
        // fall back to projected supergradient ascent from the best combination
        let (_, alpha) = self.master_primal(log_t).unwrap_or((f64::NEG_INFINITY, vec![1.0]));
        let s = self.ascend(self.combine(&alpha), log_t);
        if self.min_slack(&s, log_t) >= -tol {
            return Ok(Test::Feasible(s));
        }
        Ok(Test::Indeterminate)
    }

    fn terms(&self, s: &PsdMatrix) -> (f64, Vec<f64>) {
        let m = s.as_matrix();
        (m.quad_form(&self.a), self.b.iter().map(|b| m.quad_form(b)).collect())
    }

    fn min_slack(&self, s: &PsdMatrix, log_t: f64) -> f64 {
        let (main, leak) = self.terms(s);
        leak.iter()
            .map(|&l| self.slack(main, l, log_t))
            .fold(f64::INFINITY, f64::min)
    }

    /// Projected supergradient ascent of the minimum slack over `{S ⪰ 0, tr S <= P}`.
    fn ascend(&self, start: PsdMatrix, log_t: f64) -> PsdMatrix {
        let n = self.a.len();
        let inv_t = (-log_t).exp();
        let mut s = start;
        let mut value = self.min_slack(&s, log_t);
        let mut step = self.power / (1.0 + norm_sqr(&self.a));
        for _ in 0..ASCENT_ITERATIONS {
            let (main, leak) = self.terms(&s);
            let i = (0..self.k())
                .min_by(|&x, &y| {
                    self.slack(main, leak[x], log_t)
                        .total_cmp(&self.slack(main, leak[y], log_t))
                })
                .unwrap_or(0);
            let b = &self.b[i];
            let g = ComplexMatrix::from_fn(n, n, |r, c| self.a[r] * self.a[c].conj() * inv_t - b[r] * b[c].conj());
            let mut moved = false;
            while step > 1e-14 * self.power {
                let trial = s.as_matrix() + &g.scale(step);
                let next = PsdMatrix::project_budget(
                    &HermitianMatrix::from_matrix_unchecked(trial.hermitian_part()),
                    self.power,
                );
                let v = self.min_slack(&next, log_t);
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
        s
    }

    /// Smallest level in `[log_lo, log_t]` still excluded by `ν`.
    fn certified_upper(&self, nu: &[f64], log_lo: f64, log_t: f64) -> f64 {
        let out = |lt: f64| {
            let t = f64::exp(lt);
            self.dual_value(nu, t).0 < -CERTIFICATE_MARGIN * t
        };
        if out(log_lo) {
            return log_t;
        }
        let (mut a, mut b) = (log_lo, log_t);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if out(m) {
                b = m;
            } else {
                a = m;
            }
            if b - a <= 1e-12 * (1.0 + b.abs()) {
                break;
            }
        }
        b
    }
}

/// Secrecy capacity of the MISO wiretap channel (`H_s` a single column) with
/// single-antenna eavesdroppers, by bisection on the level `t` down to a gap
/// of `min(eps_rate, RANK_GAP)`. The returned covariance is reduced to rank
/// one when the eavesdropper count allows it, and `eigen_ratio` reports its
/// `λ₂/λ₁`.
pub fn miso_solve(p: &SecrecyProblem, eps_rate: f64) -> Result<SecrecySolution> {
    check_eps(eps_rate)?;
    if p.hs().cols() != 1 || !p.is_single_antenna() {
        return Err(Error::InvalidParameter(
            "miso_solve needs a single-column main channel and single-antenna eavesdroppers".into(),
        ));
    }
    let (cols, _) = active_columns(p);
    if cols.is_empty() {
        return with_ratio(unconstrained(p)?);
    }
    let a = p.hs().col(0);
    let b: Vec<Vec<C64>> = cols.iter().map(|g| g.col(0)).collect();
    let mut m = Miso::new(a.clone(), b.clone(), p.power());

    let (mut best, mut log_lo) = (PsdMatrix::zeros(a.len()), 0.0);
    for j in 0..m.candidates.len() {
        let c = &m.candidates[j];
        let level = Miso::log_level(c.main, &c.leak);
        if level > log_lo {
            log_lo = level;
            best = m.combine(&one_hot(m.candidates.len(), j));
        }
    }
    let mut log_hi = (p.power() * norm_sqr(&a)).ln_1p().max(log_lo);
    let mut status = SecrecyStatus::Converged;
    let mut steps = 0;
    let gap = eps_rate.min(RANK_GAP);
    while log_hi - log_lo > gap && steps < MAX_BISECTION_STEPS {
        steps += 1;
        let mid = 0.5 * (log_lo + log_hi);
        match m.test(mid, DEFAULT_WITNESS_TOL)? {
            Test::Feasible(s) => {
                let (main, leak) = m.terms(&s);
                let level = Miso::log_level(main, &leak);
                if level > log_lo {
                    log_lo = level;
                    best = s;
                }
            }
            Test::Infeasible(nu) => log_hi = m.certified_upper(&nu, log_lo, mid),
            Test::Indeterminate => break,
        }
        log_hi = log_hi.max(log_lo);
    }
    if log_hi - log_lo > eps_rate {
        status = SecrecyStatus::Indeterminate;
    }
    let mut directions = vec![a];
    directions.extend(b);
    let s = purify(&best, &directions);
    let mut sol = SecrecySolution::assemble(p, s, (log_lo, log_hi), m.candidates.len(), steps, status)?;
    sol.eigen_ratio = Some(eigen_ratio(&sol.covariance));
    Ok(sol)
}

fn with_ratio(mut sol: SecrecySolution) -> Result<SecrecySolution> {
    sol.eigen_ratio = Some(eigen_ratio(&sol.covariance));
    Ok(sol)
}

/// `λ₂/λ₁`, zero for a rank-one or zero matrix.
pub(crate) fn eigen_ratio(s: &PsdMatrix) -> f64 {
    let ev = s.eigenvalues();
    match (ev.first(), ev.get(1)) {
        (Some(&l1), Some(&l2)) if l1 > 0.0 => l2.max(0.0) / l1,
        _ => 0.0,
    }
}

/// Rank reduction keeping every `d^H S d` fixed and `tr S` non-increasing:
/// while `rank² >` the number of directions, some Hermitian `X` with
/// `S = V V^H` and `V^H d` in its null space moves `V (I + τ X) V^H` to a
/// lower rank.
pub(crate) fn purify(s: &PsdMatrix, directions: &[Vec<C64>]) -> PsdMatrix {
    let mut s = s.clone();
    loop {
        let eig = eigh(s.hermitian());
        let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return s;
        }
        let keep: Vec<usize> = (0..eig.eigenvalues.len())
            .filter(|&k| eig.eigenvalues[k] > 1e-12 * top)
            .collect();
        let r = keep.len();
        if r <= 1 || r * r <= directions.len() {
            return s;
        }
        let lambda: Vec<f64> = keep.iter().map(|&k| eig.eigenvalues[k]).collect();
        let u = eig.eigenvectors.select_cols(&keep);
        let v = ComplexMatrix::from_fn(u.rows(), r, |row, c| u[(row, c)] * lambda[c].sqrt());
        let coeffs: Vec<Vec<C64>> = directions
            .iter()
            .map(|d| {
                (0..r)
                    .map(|c| (0..d.len()).map(|row| v[(row, c)].conj() * d[row]).sum())
                    .collect()
            })
            .collect();
        // real coordinates of X: diagonal, then (Re, Im) of each upper entry
        let dim = r * r;
        let rows: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|c| {
                let mut row = Vec::with_capacity(dim);
                for j in 0..r {
                    row.push(c[j].norm_sqr());
                }
                for j in 0..r {
                    for k in (j + 1)..r {
                        let w = c[j].conj() * c[k];
                        row.push(2.0 * w.re);
                        row.push(-2.0 * w.im);
                    }
                }
                row
            })
            .collect();
        let gram = ComplexMatrix::from_fn(dim, dim, |x, y| {
            C64::new(rows.iter().map(|row| row[x] * row[y]).sum(), 0.0)
        });
        let null = eigh(&HermitianMatrix::from_matrix_unchecked(gram));
        let coords: Vec<f64> = null.eigenvectors.col(dim - 1).iter().map(|z| z.re).collect();
        let mut x = ComplexMatrix::zeros(r, r);
        let mut at = r;
        for j in 0..r {
            x[(j, j)] = C64::new(coords[j], 0.0);
            for k in (j + 1)..r {
                let z = C64::new(coords[at], coords[at + 1]);
                x[(j, k)] = z;
                x[(k, j)] = z.conj();
                at += 2;
            }
        }
        // tr(V^H V X) = Σ λ_j x_jj must not increase the power
        let trace_change: f64 = (0..r).map(|j| lambda[j] * coords[j]).sum();
        if trace_change > 0.0 {
            x = x.scale(-1.0);
        }
        let xe = eigh(&HermitianMatrix::from_matrix_unchecked(x.clone()));
        let low = *xe.eigenvalues.last().unwrap();
        if low >= 0.0 {
            return s;
        }
        let tau = -1.0 / low;
        let inner = ComplexMatrix::from_fn(r, r, |j, k| {
            let id = if j == k { 1.0 } else { 0.0 };
            C64::new(id, 0.0) + x[(j, k)] * tau
        });
        // clip the eigenvalue that just reached zero
        let inner = PsdMatrix::project(&HermitianMatrix::from_matrix_unchecked(inner.hermitian_part()));
        let next = &(&v * inner.as_matrix()) * &v.adjoint();
        let next = PsdMatrix::project(&HermitianMatrix::from_matrix_unchecked(next.hermitian_part()));
        if next.trace() > s.trace() * (1.0 + 1e-12) {
            return s;
        }
        s = next;
    }
}

fn inner(x: &[C64], v: &[C64]) -> C64 {
    x.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

fn normalized(v: &[C64]) -> Option<Vec<C64>> {
    let n = norm_sqr(v).sqrt();
    (n > 0.0).then(|| v.iter().map(|z| z / n).collect())
}

fn one_hot(n: usize, j: usize) -> Vec<f64> {
    (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn identical_channels_give_zero() {
        let h = vec![c(1.0), c(0.5)];
        let p = SecrecyProblem::single(ComplexMatrix::column(&h), vec![h.clone()], vec![1.0], 4.0).unwrap();
        let sol = miso_solve(&p, 1e-4).unwrap();
        assert!(sol.secrecy_rate.abs() < 1e-9, "{}", sol.secrecy_rate);
    }

    #[test]
    fn purify_keeps_quadratic_forms() {
        let d = vec![vec![c(1.0), c(0.0), c(0.0)], vec![c(0.3), C64::new(0.1, 0.4), c(1.0)]];
        let s = PsdMatrix::from_matrix(ComplexMatrix::from_diag(&[1.0, 2.0, 0.5])).unwrap();
        let q = purify(&s, &d);
        for v in &d {
            assert!((q.as_matrix().quad_form(v) - s.as_matrix().quad_form(v)).abs() < 1e-9);
        }
        assert!(q.trace() <= s.trace() + 1e-12);
        assert!(eigen_ratio(&q) < 1e-9, "{}", eigen_ratio(&q));
    }
}
