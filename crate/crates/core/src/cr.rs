//! Capacity of the cognitive-radio MIMO link under a transmit power budget and
//! interference-temperature (IT) limits at the primary receivers:
//!
//! ```text
//!     maximise    ln det(I + H_s^H S H_s)
//!     subject to  tr(S) <= P,  tr(G_i^H S G_i) <= Γ_i,  S ⪰ 0
//! ```
//!
//! `G_i` is the `N x 1` channel `h_i` of a single-antenna primary user, or an
//! `N x N_e` matrix when the trace form of the constraint is wanted.
//!
//! The problem is solved through its Lagrange dual. For multipliers
//! `(λ, μ)` the inner maximisation has a closed form: with
//! `A = λI + Σ μ_i G_i G_i^H`, whiten the channel by `A^{-1/2}`, water-fill
//! the resulting gains with unit price, and map back. The dual is minimised
//! with the ellipsoid method, whose cuts are the constraint slacks
//! `(P − tr S̃, Γ_i − tr(G_i^H S̃ G_i))` at the inner maximiser `S̃`.
//! Every inner maximiser, scaled back into the feasible set, is a primal
//! candidate, so the run stops with a duality-gap certificate.

use serde::{Deserialize, Serialize};

use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::linalg::{
    budgeted_waterfill, cholesky, eigh, penalized_waterfill, solve_damped_spd, solve_lower, solve_lower_adjoint,
    ComplexMatrix, HermitianMatrix, PsdMatrix, C64,
};

/// Default duality-gap tolerance in nats.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Lower bound on the ellipsoid iteration budget.
pub const MIN_ELLIPSOID_ITERATIONS: usize = 500;

/// Gap tolerance behind `eval_log_g`, `eval_g` and `grad_g`; multipliers are
/// only accurate to about the square root of the gap.
pub const EVAL_TOL: f64 = 1e-11;

/// Relative rank cut-off used when projecting out zero-limit users.
const NULLSPACE_TOL: f64 = 1e-12;

/// Channels and power budget of a spectrum-sharing link; the IT limits are
/// supplied per solve.
#[derive(Clone, Debug)]
pub struct CrChannels {
    hs: ComplexMatrix,
    interference: Vec<ComplexMatrix>,
    power: f64,
    hs_gram: ComplexMatrix,
    interference_grams: Vec<ComplexMatrix>,
    unconstrained: Unconstrained,
}

#[derive(Clone, Debug)]
struct Unconstrained {
    capacity: f64,
    covariance: PsdMatrix,
    /// Inverse water level, the power multiplier of the budget-only problem.
    lambda: f64,
    /// Largest eigenvalue of `H_s H_s^H`.
    top_gain: f64,
}

impl CrChannels {
    /// `hs` is `N x M`; every interference channel is `N x c_i`.
    pub fn new(hs: ComplexMatrix, interference: Vec<ComplexMatrix>, power: f64) -> Result<Self> {
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "power budget must be positive, got {power}"
            )));
        }
        let n = hs.rows();
        for (i, g) in interference.iter().enumerate() {
            if g.rows() != n {
                return Err(Error::Dimension(format!(
                    "interference channel {i} has {} rows, expected {n}",
                    g.rows()
                )));
            }
        }
        let hs_gram = hs.mul_adjoint(&hs);
        let interference_grams = interference.iter().map(|g| g.mul_adjoint(g)).collect();
        let unconstrained = Self::waterfill(&hs_gram, power);
        Ok(Self {
            hs,
            interference,
            power,
            hs_gram,
            interference_grams,
            unconstrained,
        })
    }

    /// Single-antenna primary users with channels `h_i`.
    pub fn single_antenna(hs: ComplexMatrix, pu: &[Vec<C64>], power: f64) -> Result<Self> {
        let cols = pu.iter().map(|h| ComplexMatrix::column(h)).collect();
        Self::new(hs, cols, power)
    }

    fn waterfill(hs_gram: &ComplexMatrix, power: f64) -> Unconstrained {
        let eig = eigh(&HermitianMatrix::from_matrix_unchecked(hs_gram.clone()));
        let gains: Vec<f64> = eig.eigenvalues.iter().map(|&g| g.max(0.0)).collect();
        let p = budgeted_waterfill(&gains, power);
        let capacity = gains.iter().zip(&p).map(|(g, p)| (g * p).ln_1p()).sum();
        let lambda = gains
            .iter()
            .zip(&p)
            .find(|(_, &pk)| pk > 0.0)
            .map(|(g, pk)| 1.0 / (pk + 1.0 / g))
            .unwrap_or(0.0);
        let covariance = PsdMatrix::from_gram_unchecked(eig.reconstruct_with_weights(&p));
        Unconstrained {
            capacity,
            covariance,
            lambda,
            top_gain: gains.first().copied().unwrap_or(0.0),
        }
    }

    pub fn hs(&self) -> &ComplexMatrix {
        &self.hs
    }

    pub fn interference(&self) -> &[ComplexMatrix] {
        &self.interference
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn tx_antennas(&self) -> usize {
        self.hs.rows()
    }

    pub fn num_users(&self) -> usize {
        self.interference.len()
    }

    /// Capacity with every IT limit removed (plain water-filling).
    pub fn unconstrained_capacity(&self) -> f64 {
        self.unconstrained.capacity
    }

    pub fn unconstrained_covariance(&self) -> &PsdMatrix {
        &self.unconstrained.covariance
    }

    /// Interference `tr(G_i^H S G_i)` that `s` causes at each user.
    pub fn interference_powers(&self, s: &PsdMatrix) -> Vec<f64> {
        self.interference.iter().map(|g| s.received_power(g)).collect()
    }

    /// Largest interference user `i` can ever see under the power budget, `P λ_max(G_i G_i^H)`.
    pub fn max_interference(&self, i: usize) -> f64 {
        let eig = eigh(&HermitianMatrix::from_matrix_unchecked(
            self.interference_grams[i].clone(),
        ));
        self.power * eig.eigenvalues[0].max(0.0)
    }

    /// Solve with IT limits `limits` (one per user; `f64::INFINITY` removes a constraint).
    pub fn solve(&self, limits: &[f64], tol: f64) -> Result<CrSolution> {
        self.solve_from(limits, tol, None)
    }

    /// As [`CrChannels::solve`], starting the dual search at the multipliers of
    /// `previous` (typically a solve at nearby limits).
    pub fn solve_from(&self, limits: &[f64], tol: f64, previous: Option<&CrSolution>) -> Result<CrSolution> {
        if limits.len() != self.num_users() {
            return Err(Error::Dimension(format!(
                "{} IT limits for {} users",
                limits.len(),
                self.num_users()
            )));
        }
        if limits.iter().any(|&l| l.is_nan() || l < 0.0) {
            return Err(Error::InvalidParameter("IT limits must be non-negative".into()));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let zero: Vec<usize> = (0..limits.len()).filter(|&i| limits[i] == 0.0).collect();
        if zero.is_empty() {
            let warm = previous
                .filter(|p| p.dual_mu.len() == limits.len())
                .map(|p| (p.dual_lambda, p.dual_mu.as_slice()));
            return Ok(self.solve_positive(limits, tol, warm));
        }
        self.solve_projected(limits, &zero, tol)
    }

    /// Users with a zero limit force `S G_i = 0`, so `S` lives on the orthogonal
    /// complement of their channels; solve the reduced problem there.
    fn solve_projected(&self, limits: &[f64], zero: &[usize], tol: f64) -> Result<CrSolution> {
        let n = self.tx_antennas();
        let cols: usize = zero.iter().map(|&i| self.interference[i].cols()).sum();
        let mut stacked = ComplexMatrix::zeros(n, cols);
        let mut at = 0;
        for &i in zero {
            let g = &self.interference[i];
            for c in 0..g.cols() {
                for r in 0..n {
                    stacked[(r, at)] = g[(r, c)];
                }
                at += 1;
            }
        }
        let mut dual_mu = vec![0.0; limits.len()];
        for &i in zero {
            dual_mu[i] = f64::INFINITY;
        }
        let Some(basis) = stacked.orthogonal_complement(NULLSPACE_TOL) else {
            return Ok(CrSolution::zero(n, dual_mu, self.unconstrained.top_gain));
        };
        let rest: Vec<usize> = (0..limits.len()).filter(|i| !zero.contains(i)).collect();
        let reduced = CrChannels::new(
            basis.adjoint_mul(&self.hs),
            rest.iter().map(|&i| basis.adjoint_mul(&self.interference[i])).collect(),
            self.power,
        )?;
        let reduced_limits: Vec<f64> = rest.iter().map(|&i| limits[i]).collect();
        let sol = reduced.solve_positive(&reduced_limits, tol, None);
        let lifted = &(&basis * sol.covariance.as_matrix()) * &basis.adjoint();
        for (k, &i) in rest.iter().enumerate() {
            dual_mu[i] = sol.dual_mu[k];
        }
        let covariance = PsdMatrix::from_gram_unchecked(lifted);
        Ok(CrSolution {
            kkt_residual: self.kkt_residual(&covariance, sol.dual_lambda, &dual_mu),
            covariance,
            capacity: sol.capacity,
            dual_lambda: sol.dual_lambda,
            dual_mu,
            duality_gap: sol.duality_gap,
            iterations: sol.iterations,
            status: sol.status,
        })
    }

    fn solve_positive(&self, limits: &[f64], tol: f64, warm: Option<(f64, &[f64])>) -> CrSolution {
        let n = self.tx_antennas();
        let k = self.num_users();
        let base = &self.unconstrained;
        if base.capacity <= 0.0 {
            return CrSolution::zero(n, vec![0.0; k], base.top_gain);
        }
        let free = self.interference_powers(&base.covariance);
        if free.iter().zip(limits).all(|(f, l)| f <= l) {
            let dual_mu = vec![0.0; k];
            return CrSolution {
                kkt_residual: self.kkt_residual(&base.covariance, base.lambda, &dual_mu),
                covariance: base.covariance.clone(),
                capacity: base.capacity,
                dual_lambda: base.lambda,
                dual_mu,
                duality_gap: 0.0,
                iterations: 0,
                status: SolveStatus::Converged,
            };
        }

        let dual = DualProblem::new(self, limits);
        let dim = dual.dim();
        let mut track = Tracker::new(dim);

        let mut converged = false;
        if let Some((lambda, mu)) = warm {
            let mut y = vec![lambda.max(0.0)];
            y.extend(
                dual.active
                    .iter()
                    .map(|&i| if mu[i].is_finite() { mu[i].max(0.0) } else { 0.0 }),
            );
            converged = dual.newton(y, tol, &mut track);
        }

        if !converged {
            // D(y*) equals the optimum, which is at most the unconstrained capacity,
            // and every term of D is non-negative: λ P <= C and μ_i Γ_i <= C.
            let mut hi = Vec::with_capacity(dim);
            hi.push((base.capacity / self.power).min(base.top_gain));
            for &i in &dual.active {
                hi.push(base.capacity / limits[i]);
            }
            let mut ellipsoid = Ellipsoid::around_box(&vec![0.0; dim], &hi);
            let cap = iteration_cap(dim);
            let coarse = tol.max(1e-1 * (1.0 + base.capacity));
            let mut next_polish = 0;
            for it in 0..cap {
                let y = ellipsoid.center().to_vec();
                if let Some(j) = (0..dim).find(|&j| y[j] < 0.0) {
                    let mut g = vec![0.0; dim];
                    g[j] = -1.0;
                    if !ellipsoid.cut(&g, -y[j]) {
                        break;
                    }
                    continue;
                }
                let point = dual.eval(&y);
                track.absorb(&point, &dual);
                if track.gap() <= tol {
                    converged = true;
                    break;
                }
                if track.gap() <= coarse && it >= next_polish {
                    if dual.newton(track.best_y.clone(), tol, &mut track) {
                        converged = true;
                        break;
                    }
                    next_polish = it + 25;
                }
                let depth = if point.floored {
                    0.0
                } else {
                    (point.value - track.best_dual).max(0.0)
                };
                if !ellipsoid.cut(&point.grad, depth) {
                    break;
                }
            }
            if !converged {
                converged = dual.newton(track.best_y.clone(), tol, &mut track);
            }
        }

        let covariance =
            PsdMatrix::from_gram_unchecked(track.best_s.take().unwrap_or_else(|| ComplexMatrix::zeros(n, n)));
        let dual_mu = dual.full_mu(&track.best_y);
        CrSolution {
            kkt_residual: self.kkt_residual(&covariance, track.best_y[0], &dual_mu),
            capacity: track.best_primal.max(0.0),
            covariance,
            dual_lambda: track.best_y[0],
            dual_mu,
            duality_gap: track.gap(),
            iterations: track.evaluations,
            status: if converged {
                SolveStatus::Converged
            } else {
                SolveStatus::MaxIterations
            },
        }
    }

    /// Closed-form maximiser of `ln det(I + H^H S H) − tr(A S)` for
    /// `A = λI + Σ μ_i G_i G_i^H`.
    ///
    /// The channel is whitened with the Cholesky factor of `A` (any square-root
    /// factor gives the same maximiser). A factor that would need a pivot below
    /// `1e-10 (1 + max diag A)` is replaced by that of `A + floor I`, and the
    /// evaluation is marked as floored.
    fn inner(&self, lambda: f64, mu: &[f64]) -> Inner {
        let n = self.tx_antennas();
        let mut a = ComplexMatrix::identity(n).scale(lambda);
        for (q, &m) in self.interference_grams.iter().zip(mu) {
            if m > 0.0 {
                a = &a + &q.scale(m);
            }
        }
        let top = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max);
        let floor = 1e-10 * (1.0 + top);
        let (l, floored) = match cholesky(&a, floor) {
            Some(l) => (l, false),
            None => {
                let ridge = &a + &ComplexMatrix::identity(n).scale(floor);
                (
                    cholesky(&ridge, 0.0).expect("ridge keeps the dual matrix positive definite"),
                    true,
                )
            }
        };
        let x = solve_lower(&l, &self.hs_gram);
        let geff = solve_lower(&l, &x.adjoint());
        let eig = eigh(&HermitianMatrix::from_matrix_unchecked(geff));
        let gains: Vec<f64> = eig.eigenvalues.iter().map(|&g| g.max(0.0)).collect();
        let p = penalized_waterfill(&gains);
        let value = gains.iter().zip(&p).map(|(g, p)| (g * p).ln_1p() - p).sum();
        let shaped = eig.reconstruct_with_weights(&p);
        let half = solve_lower_adjoint(&l, &shaped);
        let covariance = solve_lower_adjoint(&l, &half.adjoint()).hermitian_part();
        let trace = covariance.trace().re;
        let interference = self
            .interference_grams
            .iter()
            .map(|q| trace_product(q, &covariance))
            .collect();
        let modes = gains.iter().zip(&p).map(|(g, p)| g * p).collect();
        Inner {
            covariance,
            value,
            trace,
            interference,
            modes,
            floored,
        }
    }

    /// Stationarity residual `H_s (I + H_s^H S H_s)^{-1} H_s^H − λI − Σ μ_i G_i G_i^H`
    /// compressed onto the range of `S` (Frobenius norm).
    pub fn kkt_residual(&self, s: &PsdMatrix, lambda: f64, mu: &[f64]) -> f64 {
        let n = self.tx_antennas();
        let eig = eigh(s.hermitian());
        let top = eig.eigenvalues[0].max(0.0);
        if top <= 0.0 {
            return 0.0;
        }
        let range: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 1e-9 * top).collect();
        let u = eig.eigenvectors.select_cols(&range);
        let m = self.hs.cols();
        let inner = &ComplexMatrix::identity(m) + &self.hs.adjoint_mul(&(s.as_matrix() * &self.hs));
        let inv = hermitian_inverse(&inner);
        let mut r = &(&self.hs * &inv) * &self.hs.adjoint();
        r = &r - &ComplexMatrix::identity(n).scale(lambda);
        for (q, &mu_i) in self.interference_grams.iter().zip(mu) {
            if mu_i.is_finite() && mu_i > 0.0 {
                r = &r - &q.scale(mu_i);
            }
        }
        u.adjoint_mul(&(&r * &u)).frobenius_norm()
    }
}

fn iteration_cap(dim: usize) -> usize {
    MIN_ELLIPSOID_ITERATIONS.max(60 * dim * dim * (dim + 1))
}

fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            acc += (a[(r, c)] * b[(c, r)]).re;
        }
    }
    acc
}

fn hermitian_inverse(a: &ComplexMatrix) -> ComplexMatrix {
    eigh(&HermitianMatrix::from_matrix_unchecked(a.clone())).reconstruct_with(|l| 1.0 / l)
}

/// Dual function restricted to the users whose limit is finite:
/// `y = (λ, μ_active)`.
struct DualProblem<'a> {
    channels: &'a CrChannels,
    limits: &'a [f64],
    active: Vec<usize>,
}

struct DualPoint {
    y: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    floored: bool,
    inner: Inner,
}

const NEWTON_ITERATIONS: usize = 40;

impl<'a> DualProblem<'a> {
    fn new(channels: &'a CrChannels, limits: &'a [f64]) -> Self {
        let active = (0..limits.len()).filter(|&i| limits[i].is_finite()).collect();
        Self {
            channels,
            limits,
            active,
        }
    }

    fn dim(&self) -> usize {
        1 + self.active.len()
    }

    fn full_mu(&self, y: &[f64]) -> Vec<f64> {
        let mut mu = vec![0.0; self.limits.len()];
        for (k, &i) in self.active.iter().enumerate() {
            mu[i] = y[k + 1];
        }
        mu
    }

    fn eval(&self, y: &[f64]) -> DualPoint {
        let inner = self.channels.inner(y[0], &self.full_mu(y));
        let power = self.channels.power;
        let mut value = inner.value + y[0] * power;
        let mut grad = vec![power - inner.trace];
        for (k, &i) in self.active.iter().enumerate() {
            value += y[k + 1] * self.limits[i];
            grad.push(self.limits[i] - inner.interference[i]);
        }
        DualPoint {
            y: y.to_vec(),
            value,
            grad,
            floored: inner.floored,
            inner,
        }
    }

    /// Projected Newton on the dual from `y`, with a finite-difference Hessian
    /// on the free coordinates. Returns `true` once the gap certificate reaches `tol`.
    fn newton(&self, mut y: Vec<f64>, tol: f64, track: &mut Tracker) -> bool {
        let dim = self.dim();
        let mut point = self.eval(&y);
        track.absorb(&point, self);
        if point.floored {
            return false;
        }
        for _ in 0..NEWTON_ITERATIONS {
            if track.gap() <= tol {
                return true;
            }
            let free: Vec<usize> = (0..dim).filter(|&j| y[j] > 0.0 || point.grad[j] < 0.0).collect();
            if free.is_empty() {
                return track.gap() <= tol;
            }
            let m = free.len();
            let mut hess = vec![0.0; m * m];
            for (a, &j) in free.iter().enumerate() {
                let h = 1e-7 * (1.0 + y[j].abs());
                let mut yp = y.clone();
                yp[j] += h;
                let probe = self.eval(&yp);
                track.absorb(&probe, self);
                for (b, &l) in free.iter().enumerate() {
                    hess[b * m + a] = (probe.grad[l] - point.grad[l]) / h;
                }
            }
            for a in 0..m {
                for b in (a + 1)..m {
                    let v = 0.5 * (hess[a * m + b] + hess[b * m + a]);
                    hess[a * m + b] = v;
                    hess[b * m + a] = v;
                }
            }
            let rhs: Vec<f64> = free.iter().map(|&j| -point.grad[j]).collect();
            let Some(step) = solve_damped_spd(&hess, &rhs, m) else {
                return false;
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..30 {
                let mut trial = y.clone();
                for (a, &j) in free.iter().enumerate() {
                    trial[j] = (y[j] + t * step[a]).max(0.0);
                }
                let decrease: f64 = (0..dim).map(|j| point.grad[j] * (trial[j] - y[j])).sum();
                let cand = self.eval(&trial);
                track.absorb(&cand, self);
                if !cand.floored && cand.value <= point.value + 1e-4 * decrease.min(0.0) {
                    accepted = Some((trial, cand));
                    break;
                }
                t *= 0.5;
            }
            let Some((next_y, next)) = accepted else {
                return track.gap() <= tol;
            };
            y = next_y;
            point = next;
        }
        track.gap() <= tol
    }
}

/// Best dual bound and best feasible primal seen so far.
struct Tracker {
    best_dual: f64,
    best_y: Vec<f64>,
    best_primal: f64,
    best_s: Option<ComplexMatrix>,
    evaluations: usize,
}

impl Tracker {
    fn new(dim: usize) -> Self {
        Self {
            best_dual: f64::INFINITY,
            best_y: vec![0.0; dim],
            best_primal: f64::NEG_INFINITY,
            best_s: None,
            evaluations: 0,
        }
    }

    fn gap(&self) -> f64 {
        self.best_dual - self.best_primal.max(0.0)
    }

    fn absorb(&mut self, point: &DualPoint, dual: &DualProblem) {
        self.evaluations += 1;
        if !point.floored && point.value < self.best_dual {
            self.best_dual = point.value;
            self.best_y.clone_from(&point.y);
        }
        let inner = &point.inner;
        let mut shrink: f64 = 1.0;
        if inner.trace > 0.0 {
            shrink = shrink.min(dual.channels.power / inner.trace);
        }
        for &i in &dual.active {
            if inner.interference[i] > 0.0 {
                shrink = shrink.min(dual.limits[i] / inner.interference[i]);
            }
        }
        let value: f64 = inner.modes.iter().map(|m| (shrink * m).ln_1p()).sum();
        if value > self.best_primal {
            self.best_primal = value;
            self.best_s = Some(inner.covariance.scale(shrink));
        }
    }
}

struct Inner {
    covariance: ComplexMatrix,
    value: f64,
    trace: f64,
    interference: Vec<f64>,
    /// Eigenvalues `σ_k² p_k` of `H^H S H`.
    modes: Vec<f64>,
    floored: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

/// Primal-dual result of a spectrum-sharing solve.
#[derive(Clone, Debug)]
pub struct CrSolution {
    pub covariance: PsdMatrix,
    /// `ln det(I + H_s^H S H_s)` of the returned (feasible) covariance, nats.
    pub capacity: f64,
    pub dual_lambda: f64,
    /// One multiplier per user; `f64::INFINITY` for users whose limit is zero.
    pub dual_mu: Vec<f64>,
    pub kkt_residual: f64,
    /// Best dual bound minus `capacity`.
    pub duality_gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl CrSolution {
    fn zero(n: usize, dual_mu: Vec<f64>, top_gain: f64) -> Self {
        Self {
            covariance: PsdMatrix::zeros(n),
            capacity: 0.0,
            dual_lambda: top_gain,
            dual_mu,
            kkt_residual: 0.0,
            duality_gap: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
        }
    }
}

/// A spectrum-sharing instance: channels, power budget, IT limits.
#[derive(Clone, Debug)]
pub struct CrProblem {
    pub channels: CrChannels,
    pub limits: Vec<f64>,
}

impl CrProblem {
    pub fn new(channels: CrChannels, limits: Vec<f64>) -> Result<Self> {
        if limits.len() != channels.num_users() {
            return Err(Error::Dimension(format!(
                "{} IT limits for {} users",
                limits.len(),
                channels.num_users()
            )));
        }
        Ok(Self { channels, limits })
    }
}

pub fn solve_pa(p: &CrProblem, tol: f64) -> Result<CrSolution> {
    p.channels.solve(&p.limits, tol)
}

/// `ln g(Γ)`: the constrained capacity in nats. Use this instead of
/// [`eval_g`] whenever `g` could overflow.
pub fn eval_log_g(channels: &CrChannels, limits: &[f64]) -> Result<f64> {
    Ok(channels.solve(limits, EVAL_TOL)?.capacity)
}

/// `g(Γ) = max det(I + H_s^H S H_s)` over the constrained set (determinant scale, `>= 1`).
pub fn eval_g(channels: &CrChannels, limits: &[f64]) -> Result<f64> {
    Ok(eval_log_g(channels, limits)?.exp())
}

/// `∂g/∂Γ_i = μ_i g(Γ)`.
///
/// A zero limit has no finite multiplier from the projected solve, so the
/// right derivative is taken at `Γ_i = 1e-9 (1 + P λ_max(G_i G_i^H))` instead.
pub fn grad_g(channels: &CrChannels, limits: &[f64]) -> Result<Vec<f64>> {
    let sol = channels.solve(&nudge_zero_limits(channels, limits), EVAL_TOL)?;
    let g = sol.capacity.exp();
    Ok(sol.dual_mu.iter().map(|m| m * g).collect())
}

pub(crate) fn nudge_zero_limits(channels: &CrChannels, limits: &[f64]) -> Vec<f64> {
    limits
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l == 0.0 {
                1e-9 * (1.0 + channels.max_interference(i))
            } else {
                l
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn symmetric_waterfilling() {
        let ch = CrChannels::new(ComplexMatrix::identity(2), vec![], 2.0).unwrap();
        let sol = ch.solve(&[], 1e-9).unwrap();
        assert!((sol.capacity - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!((sol.covariance.as_matrix() - &ComplexMatrix::identity(2)).frobenius_norm() < 1e-9);
    }

    #[test]
    fn scalar_binding_constraint() {
        let ch = CrChannels::single_antenna(ComplexMatrix::column(&[c(1.0)]), &[vec![c(1.0)]], 10.0).unwrap();
        let sol = ch.solve(&[1.0], 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!((sol.capacity - 2f64.ln()).abs() < 1e-8, "{}", sol.capacity);
        assert!((sol.covariance.trace() - 1.0).abs() < 1e-6);
        // g(Γ) = 1 + Γ below Γ = P, so the gradient is 1
        let grad = grad_g(&ch, &[1.0]).unwrap();
        assert!((grad[0] - 1.0).abs() < 1e-4, "{grad:?}");
        assert!((eval_g(&ch, &[1.0]).unwrap() - 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_limit_projects_out_user() {
        let hs = ComplexMatrix::identity(2);
        let ch = CrChannels::single_antenna(hs, &[vec![c(1.0), c(0.0)]], 4.0).unwrap();
        let sol = ch.solve(&[0.0], 1e-9).unwrap();
        // all power goes to the second antenna
        assert!((sol.capacity - 5f64.ln()).abs() < 1e-9);
        assert!(sol.covariance.as_matrix()[(0, 0)].norm() < 1e-12);
        assert!(sol.dual_mu[0].is_infinite());
    }

    #[test]
    fn rejects_bad_limits() {
        let ch = CrChannels::single_antenna(ComplexMatrix::identity(2), &[vec![c(1.0), c(0.0)]], 1.0).unwrap();
        assert!(ch.solve(&[-1.0], 1e-6).is_err());
        assert!(ch.solve(&[1.0, 2.0], 1e-6).is_err());
        assert!(CrChannels::new(ComplexMatrix::identity(2), vec![], 0.0).is_err());
    }
}
