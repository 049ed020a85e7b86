//! Level-set tests for `max_Γ min_i ln g(Γ) − ln d_i(Γ_i)`.
//!
//! `ln g` is concave (it is the perturbation function of a convex program), but
//! `g` itself need not be once `H_s` has rank two or more, and neither need the
//! slacks `g/t − d_i`. The tests therefore rest only on facts that hold in
//! general:
//!
//! * every capacity solve at `Γ_j` returns multipliers `(λ_j, μ_j)` whose dual
//!   value `ℓ_j` bounds `ln g(Γ_j)`, and `ln g(x) <= ℓ_j + μ_j·(x − Γ_j)` for
//!   every `x` (the dual function is affine in the limits);
//! * `g` is non-decreasing;
//! * `ln d_i` is concave, so on an interval it lies above its chord.
//!
//! The box `[0, Γ̄]` is split into cells. On a cell, the planes and chords give
//! an LP relaxation; for any simplex weights `ν` over eavesdroppers and `β`
//! over planes, `Σ β_j plane_j(x) − Σ ν_i chord_i(x_i)` bounds the objective
//! from above, and its maximum over the cell is available in closed form.
//! Weights come from the LP dual, but the bound is recomputed from them
//! exactly, so LP round-off cannot produce a wrong certificate.
//!
//! A level is declared reachable with a witness (an evaluated point whose
//! level is within `tol`) and unreachable when every cell's bound is below it
//! by more than [`CERTIFICATE_MARGIN`]. Cells are refined best-first.

use std::collections::HashMap;

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::SecrecyProblem;
use crate::cr::{CrChannels, CrSolution, EVAL_TOL};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, ComplexMatrix};

/// Default level tolerance for accepting a witness, in nats.
pub const DEFAULT_WITNESS_TOL: f64 = 1e-8;
/// An infeasibility bound must be below the level by more than this.
pub const CERTIFICATE_MARGIN: f64 = 1e-10;

/// Planes borrowed from points near a cell, on top of those inside it.
const NEAR_PLANES: usize = 6;
/// Planes steeper than this (relative to the cell) only hurt the LP's conditioning.
const MAX_PLANE_RISE: f64 = 1e4;

/// Leakage denominator `d(Γ)`: `1 + Γ`, or `(1 + Γ/L)^L` for the trace bound
/// on an `L`-dimensional eavesdropper.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Leakage {
    Linear,
    Power(f64),
}

impl Leakage {
    pub(crate) fn log_value(self, x: f64) -> f64 {
        match self {
            Leakage::Linear => x.ln_1p(),
            Leakage::Power(l) => l * (x / l).ln_1p(),
        }
    }

    /// Chord `a + b x` of `ln d` over `[l, u]`, nudged down to stay below it.
    fn chord(self, l: f64, u: f64) -> (f64, f64) {
        let (fl, fu) = (self.log_value(l), self.log_value(u));
        let b = if u > l { ((fu - fl) / (u - l)).max(0.0) } else { 0.0 };
        (fl - b * l - 1e-14 * (1.0 + fu), b)
    }
}

/// One capacity solve at limits `gamma`.
pub(crate) struct Point {
    pub gamma: Vec<f64>,
    /// `ln g` achieved by `solution.covariance`.
    pub log_g: f64,
    /// Dual value at the returned multipliers: an upper bound on `ln g`.
    pub log_g_upper: f64,
    pub solution: CrSolution,
}

impl Point {
    fn has_gradient(&self) -> bool {
        self.solution.dual_mu.iter().all(|m| m.is_finite())
    }
}

/// Plane `ln g(x) <= offset + slope·x`.
struct Plane {
    offset: f64,
    slope: Vec<f64>,
}

/// A box `[lower, upper]` of leakage levels with a certified bound on the
/// objective over it.
#[derive(Clone, Debug)]
pub(crate) struct Cell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Point evaluated at `upper`.
    corner: usize,
    pub bound: f64,
    /// Eavesdropper weights behind `bound`.
    pub nu: Vec<f64>,
    /// Number of points when `bound` was computed.
    seen: usize,
    probed: bool,
}

#[derive(Clone, Debug)]
pub(crate) enum Decision {
    Feasible(usize),
    /// Every cell is certified below the level.
    Infeasible,
    /// The global bracket is already within the requested gap.
    Settled,
    Indeterminate,
}

/// Evaluated points of `g` and the cell partition for one set of channels,
/// shared by every level test.
pub(crate) struct Landscape {
    channels: CrChannels,
    leakage: Leakage,
    /// Box `[0, hi_i]` that holds every achievable `Γ_i` (`P λ_max(G_i G_i^H)`).
    pub hi: Vec<f64>,
    /// Probes keep `Γ_i >= lo_i > 0` so that multipliers stay finite.
    lo: Vec<f64>,
    pub points: Vec<Point>,
    index: HashMap<Vec<u64>, usize>,
    pub cells: Vec<Cell>,
    pub log_t_bar: f64,
    best: (f64, usize),
    eval_tol: f64,
}

impl Landscape {
    pub(crate) fn new(channels: CrChannels, leakage: Leakage) -> Result<Self> {
        let k = channels.num_users();
        let hi: Vec<f64> = (0..k).map(|i| channels.max_interference(i)).collect();
        let lo = hi.iter().map(|&h| (1e-9 * (1.0 + h)).min(h)).collect();
        let log_t_bar = channels.unconstrained_capacity();
        let mut land = Self {
            channels,
            leakage,
            hi,
            lo,
            points: Vec::new(),
            index: HashMap::new(),
            cells: Vec::new(),
            log_t_bar,
            best: (f64::NEG_INFINITY, 0),
            eval_tol: EVAL_TOL,
        };
        land.eval(&vec![0.0; k])?;
        // interference of the unconstrained optimum: g is maximal from there on
        let free = land
            .channels
            .interference_powers(land.channels.unconstrained_covariance());
        let start: Vec<f64> = (0..k).map(|i| free[i].clamp(land.lo[i], land.hi[i])).collect();
        land.eval(&start)?;
        let top = land.hi.clone();
        let corner = land.eval(&top)?;
        let mut cell = Cell {
            lower: vec![0.0; k],
            upper: top,
            corner,
            bound: f64::INFINITY,
            nu: vec![1.0 / k as f64; k],
            seen: 0,
            probed: false,
        };
        land.rebound(&mut cell);
        land.cells.push(cell);
        Ok(land)
    }

    pub(crate) fn dim(&self) -> usize {
        self.hi.len()
    }

    pub(crate) fn solves(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn tighten(&mut self) {
        self.eval_tol = self.eval_tol.min(1e-13);
    }

    pub(crate) fn eval(&mut self, gamma: &[f64]) -> Result<usize> {
        let key: Vec<u64> = gamma.iter().map(|g| g.to_bits()).collect();
        if let Some(&j) = self.index.get(&key) {
            return Ok(j);
        }
        let warm = self
            .points
            .iter()
            .filter(|p| p.has_gradient())
            .min_by(|a, b| distance(&a.gamma, gamma, &self.hi).total_cmp(&distance(&b.gamma, gamma, &self.hi)))
            .map(|p| &p.solution);
        let solution = self.channels.solve_from(gamma, self.eval_tol, warm)?;
        let j = self.points.len();
        self.points.push(Point {
            gamma: gamma.to_vec(),
            log_g: solution.capacity,
            log_g_upper: solution.capacity + solution.duality_gap.max(0.0),
            solution,
        });
        self.index.insert(key, j);
        let level = self.level(j);
        if level > self.best.0 {
            self.best = (level, j);
        }
        Ok(j)
    }

    /// `ln min_i g/d_i` achieved by the covariance of point `j`.
    pub(crate) fn level(&self, j: usize) -> f64 {
        let p = &self.points[j];
        let worst = p.gamma.iter().map(|&x| self.leakage.log_value(x)).fold(0.0, f64::max);
        p.log_g - worst
    }

    pub(crate) fn best_level(&self) -> (f64, usize) {
        self.best
    }

    /// Certified upper bound on the optimum over the whole box.
    pub(crate) fn upper(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| c.bound)
            .fold(f64::NEG_INFINITY, f64::max)
            .min(self.log_t_bar)
    }

    fn planes(&self, cell: &Cell) -> Vec<Plane> {
        let k = self.dim();
        let corner = &self.points[cell.corner];
        let mut planes = vec![Plane {
            offset: corner.log_g_upper,
            slope: vec![0.0; k],
        }];
        let centre: Vec<f64> = (0..k).map(|i| 0.5 * (cell.lower[i] + cell.upper[i])).collect();
        let mut near: Vec<(f64, usize)> = Vec::new();
        for (j, p) in self.points.iter().enumerate() {
            if !p.has_gradient() {
                continue;
            }
            let inside = (0..k).all(|i| p.gamma[i] >= cell.lower[i] && p.gamma[i] <= cell.upper[i]);
            let d = if inside || j == cell.corner {
                -1.0
            } else {
                distance(&p.gamma, &centre, &self.hi)
            };
            near.push((d, j));
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0));
        let inside = near.iter().filter(|(d, _)| *d < 0.0).count();
        for &(_, j) in near.iter().take(inside + NEAR_PLANES) {
            let p = &self.points[j];
            let mu = &p.solution.dual_mu;
            let rise: f64 = (0..k).map(|i| mu[i] * (cell.upper[i] - cell.lower[i])).sum();
            if !(rise <= MAX_PLANE_RISE * (1.0 + p.log_g_upper.abs())) {
                continue;
            }
            let offset = p.log_g_upper - (0..k).map(|i| mu[i] * p.gamma[i]).sum::<f64>();
            planes.push(Plane {
                offset,
                slope: mu.clone(),
            });
        }
        planes
    }

    /// Exact value of the weighted relaxation over `cell`.
    fn weighted_bound(&self, cell: &Cell, planes: &[Plane], chords: &[(f64, f64)], nu: &[f64], beta: &[f64]) -> f64 {
        let k = self.dim();
        let mut value = 0.0;
        let mut c = vec![0.0; k];
        for (p, &b) in planes.iter().zip(beta) {
            if b > 0.0 {
                value += b * p.offset;
                for i in 0..k {
                    c[i] += b * p.slope[i];
                }
            }
        }
        for i in 0..k {
            value -= nu[i] * chords[i].0;
            c[i] -= nu[i] * chords[i].1;
            value += (c[i] * cell.lower[i]).max(c[i] * cell.upper[i]);
        }
        value
    }

    /// LP dual of the cell relaxation: simplex weights `(ν, β)` minimising
    /// the weighted bound.
    fn dual_weights(&self, cell: &Cell, planes: &[Plane], chords: &[(f64, f64)]) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = self.dim();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let nu: Vec<_> = (0..k).map(|i| lp.add_var(-chords[i].0, (0.0, 1.0))).collect();
        let beta: Vec<_> = planes.iter().map(|p| lp.add_var(p.offset, (0.0, 1.0))).collect();
        let r: Vec<_> = (0..k)
            .map(|_| lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        lp.add_constraint(nu.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
        lp.add_constraint(
            beta.iter().map(|&v| (v, 1.0)).collect::<Vec<_>>(),
            ComparisonOp::Eq,
            1.0,
        );
        for i in 0..k {
            let ends: &[f64] = if cell.lower[i] == cell.upper[i] {
                &cell.lower[i..=i]
            } else {
                &[cell.lower[i], cell.upper[i]]
            };
            for &x in ends {
                // r_i >= x (Σ β_j μ_ji − ν_i b_i)
                let mut row = vec![(r[i], 1.0)];
                if chords[i].1 * x != 0.0 {
                    row.push((nu[i], chords[i].1 * x));
                }
                for (p, &b) in planes.iter().zip(&beta) {
                    if p.slope[i] * x != 0.0 {
                        row.push((b, -p.slope[i] * x));
                    }
                }
                lp.add_constraint(row, ComparisonOp::Ge, 0.0);
            }
        }
        let sol = lp.solve().ok()?;
        let simplex = |vars: &[microlp::Variable]| {
            let w: Vec<f64> = vars.iter().map(|&v| sol[v].max(0.0)).collect();
            let s: f64 = w.iter().sum();
            (s > 0.0).then(|| w.iter().map(|x| x / s).collect::<Vec<_>>())
        };
        Some((simplex(&nu)?, simplex(&beta)?))
    }

    /// Primal maximiser of the cell relaxation, used as the next probe.
    fn relaxation_argmax(&self, cell: &Cell, planes: &[Plane], chords: &[(f64, f64)]) -> Option<Vec<f64>> {
        let k = self.dim();
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let x: Vec<_> = (0..k)
            .map(|i| lp.add_var(0.0, (cell.lower[i], cell.upper[i])))
            .collect();
        let w = lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY));
        let z = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for i in 0..k {
            lp.add_constraint(
                vec![(z, 1.0), (w, -1.0), (x[i], chords[i].1)],
                ComparisonOp::Le,
                -chords[i].0,
            );
        }
        for p in planes {
            let mut row = vec![(w, 1.0)];
            row.extend((0..k).filter(|&i| p.slope[i] != 0.0).map(|i| (x[i], -p.slope[i])));
            lp.add_constraint(row, ComparisonOp::Le, p.offset);
        }
        let sol = lp.solve().ok()?;
        Some(x.iter().map(|&v| sol[v]).collect())
    }

    fn rebound(&self, cell: &mut Cell) {
        let k = self.dim();
        let planes = self.planes(cell);
        let chords: Vec<(f64, f64)> = (0..k)
            .map(|i| self.leakage.chord(cell.lower[i], cell.upper[i]))
            .collect();
        // monotone bound: g(upper) against the largest leakage at `lower`
        let worst = (0..k)
            .max_by(|&a, &b| {
                self.leakage
                    .log_value(cell.lower[a])
                    .total_cmp(&self.leakage.log_value(cell.lower[b]))
            })
            .unwrap_or(0);
        let mut nu = vec![0.0; k];
        nu[worst] = 1.0;
        let mut beta = vec![0.0; planes.len()];
        beta[0] = 1.0;
        let mut best = (self.weighted_bound(cell, &planes, &chords, &nu, &beta), nu);
        if let Some((nu, beta)) = self.dual_weights(cell, &planes, &chords) {
            let value = self.weighted_bound(cell, &planes, &chords, &nu, &beta);
            if value < best.0 {
                best = (value, nu);
            }
        }
        if best.0 < cell.bound {
            cell.bound = best.0;
            cell.nu = best.1;
        }
        cell.seen = self.points.len();
    }

    fn refresh(&mut self, c: usize) {
        let mut cell = self.cells[c].clone();
        self.rebound(&mut cell);
        self.cells[c] = cell;
    }

    fn probe(&mut self, c: usize) -> Result<()> {
        let k = self.dim();
        let cell = &self.cells[c];
        let planes = self.planes(cell);
        let chords: Vec<(f64, f64)> = (0..k)
            .map(|i| self.leakage.chord(cell.lower[i], cell.upper[i]))
            .collect();
        let target = self
            .relaxation_argmax(cell, &planes, &chords)
            .unwrap_or_else(|| (0..k).map(|i| 0.5 * (cell.lower[i] + cell.upper[i])).collect());
        let x: Vec<f64> = (0..k)
            .map(|i| target[i].clamp(cell.lower[i].max(self.lo[i]).min(cell.upper[i]), cell.upper[i]))
            .collect();
        self.cells[c].probed = true;
        self.eval(&x)?;
        Ok(())
    }

    /// Halves cell `c` in `ln(1 + Γ)` along its widest side.
    fn split(&mut self, c: usize) -> Result<()> {
        let k = self.dim();
        let cell = self.cells[c].clone();
        let width = |i: usize| cell.upper[i].ln_1p() - cell.lower[i].ln_1p();
        let axis = (0..k).max_by(|&a, &b| width(a).total_cmp(&width(b))).unwrap_or(0);
        let mid = (((1.0 + cell.lower[axis]) * (1.0 + cell.upper[axis])).sqrt() - 1.0)
            .clamp(cell.lower[axis], cell.upper[axis]);
        let mut low = cell.clone();
        low.upper[axis] = mid;
        low.corner = self.eval(&low.upper)?;
        low.probed = false;
        let mut high = cell;
        high.lower[axis] = mid;
        high.probed = false;
        for child in [&mut low, &mut high] {
            child.seen = 0;
        }
        self.rebound(&mut low);
        self.rebound(&mut high);
        self.cells[c] = low;
        self.cells.push(high);
        Ok(())
    }

    /// Tests the level `log_t` (nats). Stops early with `Settled` once the
    /// global bracket `[best level, max bound]` is within `gap`; gives up after
    /// `budget` further capacity solves.
    pub(crate) fn decide(&mut self, log_t: f64, tol: f64, gap: f64, budget: usize) -> Result<Decision> {
        let start = self.points.len();
        loop {
            if self.best.0 >= log_t - tol {
                return Ok(Decision::Feasible(self.best.1));
            }
            let Some(c) = (0..self.cells.len())
                .filter(|&c| self.cells[c].bound >= log_t - CERTIFICATE_MARGIN)
                .max_by(|&a, &b| self.cells[a].bound.total_cmp(&self.cells[b].bound))
            else {
                return Ok(Decision::Infeasible);
            };
            if self.cells[c].bound.min(self.log_t_bar) - self.best.0 <= gap {
                return Ok(Decision::Settled);
            }
            if self.cells[c].seen < self.points.len() {
                self.refresh(c);
                continue;
            }
            if self.points.len() - start >= budget {
                return Ok(Decision::Indeterminate);
            }
            if self.cells[c].probed {
                self.split(c)?;
            } else {
                self.probe(c)?;
            }
        }
    }
}

fn distance(a: &[f64], b: &[f64], scale: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(scale)
        .map(|((x, y), s)| (x - y).abs() / (1.0 + s))
        .fold(0.0, f64::max)
}

/// Capacity solves allowed per level test.
pub(crate) fn solve_budget(k: usize, thorough: bool) -> usize {
    let base = 300 + 300 * k * k;
    if thorough {
        4 * base
    } else {
        base
    }
}

/// Noise-normalised single-antenna channels, with the indices of the
/// eavesdroppers that can receive anything at all.
pub(crate) fn active_columns(p: &SecrecyProblem) -> (Vec<ComplexMatrix>, Vec<usize>) {
    let mut cols = Vec::new();
    let mut kept = Vec::new();
    for (i, g) in p.scaled_channels().into_iter().enumerate() {
        if norm_sqr(g.as_slice()) > 0.0 {
            cols.push(g);
            kept.push(i);
        }
    }
    (cols, kept)
}

/// One cell of an infeasibility certificate: over `lower <= Γ <= upper`
/// (original scale), `min_i ln[g(Γ)/(t(1 + Γ_i/σ_i²))] <= bound < 0`, proven
/// with eavesdropper weights `nu` (unit simplex).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub nu: Vec<f64>,
    pub bound: f64,
}

/// Verdict of a level test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    /// IT levels `Γ_i` (original scale, `h_i^H S h_i`) reaching the level.
    Feasible { gamma: Vec<f64> },
    /// Cells covering `[0, Γ̄]`, each certified below the level.
    Infeasible { cells: Vec<CertificateCell> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOutcome {
    pub verdict: Verdict,
    /// Log-scale margin `max_Γ min_i ln[g(Γ)/(t d_i(Γ_i))]`, or rather a
    /// certified side of it: at the witness (`>= −tol`) when feasible, the
    /// largest cell bound (`< 0`) when infeasible.
    pub f0_value: f64,
}

/// Tests whether the secrecy level `t` (determinant-ratio scale) is reachable:
/// is there `Γ >= 0` with `g(Γ) >= t (1 + Γ_i/σ_i²)` for every eavesdropper?
/// `tol` is the accepted shortfall of a witness, in nats.
pub fn feasibility_check(t: f64, p: &SecrecyProblem, tol: f64) -> Result<FeasibilityOutcome> {
    if !p.is_single_antenna() {
        return Err(Error::InvalidParameter(
            "feasibility_check needs single-antenna eavesdroppers".into(),
        ));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "level must be positive and finite, got {t}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let sigma2: Vec<f64> = p
        .eavesdroppers()
        .iter()
        .map(|e| match e {
            super::Eavesdropper::Single { sigma2, .. } => *sigma2,
            super::Eavesdropper::Multi { .. } => unreachable!(),
        })
        .collect();
    let (cols, kept) = active_columns(p);
    let k = p.num_eavesdroppers();
    let log_t = t.ln();
    if cols.is_empty() {
        // nothing leaks: the level is reachable iff it is below the free capacity
        let free = CrChannels::new(p.hs().clone(), vec![], p.power())?.unconstrained_capacity();
        let verdict = if log_t <= free + tol {
            Verdict::Feasible { gamma: vec![0.0; k] }
        } else {
            Verdict::Infeasible {
                cells: vec![CertificateCell {
                    lower: vec![0.0; k],
                    upper: vec![0.0; k],
                    nu: vec![1.0 / k as f64; k],
                    bound: free - log_t,
                }],
            }
        };
        return Ok(FeasibilityOutcome {
            verdict,
            f0_value: free - log_t,
        });
    }
    let channels = CrChannels::new(p.hs().clone(), cols, p.power())?;
    let mut land = Landscape::new(channels, Leakage::Linear)?;
    let kk = land.dim();
    let gap = 0.0;
    let mut decision = land.decide(log_t, tol, gap, solve_budget(kk, false))?;
    if matches!(decision, Decision::Indeterminate) {
        land.tighten();
        decision = land.decide(log_t, tol, gap, solve_budget(kk, true))?;
    }
    let scale = |x: &[f64]| {
        let mut full = vec![0.0; k];
        for (a, &i) in kept.iter().enumerate() {
            full[i] = x[a] * sigma2[i];
        }
        full
    };
    match decision {
        Decision::Feasible(j) => Ok(FeasibilityOutcome {
            verdict: Verdict::Feasible {
                gamma: scale(&land.points[j].gamma),
            },
            f0_value: land.level(j) - log_t,
        }),
        Decision::Infeasible => {
            let cells = land
                .cells
                .iter()
                .map(|c| {
                    let mut nu = vec![0.0; k];
                    for (a, &i) in kept.iter().enumerate() {
                        nu[i] = c.nu[a];
                    }
                    CertificateCell {
                        lower: scale(&c.lower),
                        upper: scale(&c.upper),
                        nu,
                        bound: c.bound - log_t,
                    }
                })
                .collect();
            Ok(FeasibilityOutcome {
                verdict: Verdict::Infeasible { cells },
                f0_value: land.upper() - log_t,
            })
        }
        Decision::Settled | Decision::Indeterminate => Err(Error::Indeterminate {
            t,
            best_slack: land.best_level().0 - log_t,
            best_certificate: land.upper() - log_t,
        }),
    }
}
