//! Γ-surface scans of `F(Γ) = g(Γ)/(1 + Γ)` (one eavesdropper) and
//! `min_i F_i(Γ_1, Γ_2)` (two), with shape verdicts.

use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use secrecy_core::cr::{CrChannels, CrSolution, EVAL_TOL};

use crate::config::{db_to_linear, gen_channels, ExperimentConfig};
use crate::io::fmt12;

pub const GRID_POINTS: usize = 50;
/// Relative slack allowed for a dip before it breaks unimodality.
pub const PLATEAU_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScanResult {
    pub k: usize,
    pub p_db: f64,
    /// `[0, Γ̄_i]` sampled at `GRID_POINTS` points per axis.
    pub axes: Vec<Vec<f64>>,
    /// `F` on the grid, row-major with `Γ_1` the row index.
    pub values: Vec<f64>,
    /// K=1: `F` is unimodal. K=2: along every row (fixed `Γ_1`) each
    /// superlevel set is an interval.
    pub verdict: bool,
    /// Largest dip below the surrounding maxima, relative to `1 + max F`.
    pub worst_dip: f64,
    /// The same test along columns (fixed `Γ_2`); informational.
    pub column_verdict: Option<bool>,
}

/// Largest `min(max f[..j], max f[j+1..]) − f[j]`: zero iff every superlevel
/// set of the sequence is an interval.
pub fn worst_dip(f: &[f64]) -> f64 {
    let n = f.len();
    let mut suffix = vec![f64::NEG_INFINITY; n + 1];
    for j in (0..n).rev() {
        suffix[j] = suffix[j + 1].max(f[j]);
    }
    let mut prefix = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for j in 0..n {
        worst = worst.max(prefix.min(suffix[j + 1]) - f[j]);
        prefix = prefix.max(f[j]);
    }
    worst
}

impl ScanResult {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.k == 1 {
            w.write_record(["gamma1", "F"])?;
            for (g, v) in self.axes[0].iter().zip(&self.values) {
                w.write_record([fmt12(*g), fmt12(*v)])?;
            }
        } else {
            w.write_record(["gamma1", "gamma2", "F"])?;
            let n2 = self.axes[1].len();
            for (r, g1) in self.axes[0].iter().enumerate() {
                for (c, g2) in self.axes[1].iter().enumerate() {
                    w.write_record([fmt12(*g1), fmt12(*g2), fmt12(self.values[r * n2 + c])])?;
                }
            }
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }
}

/// Scans trial `trial` of `cfg` (single-antenna eavesdroppers, unit noise) at
/// `p_db`. `Γ̄_i` is the leakage of the unconstrained optimum.
pub fn scan_surface(cfg: &ExperimentConfig, trial: u64, p_db: f64) -> Result<ScanResult> {
    if !(1..=2).contains(&cfg.k) || cfg.ne != 1 {
        bail!("scan needs K in {{1, 2}} single-antenna eavesdroppers");
    }
    let ch = gen_channels(cfg, trial);
    let channels = CrChannels::new(ch.hs.clone(), ch.eavesdroppers.clone(), db_to_linear(p_db))?;
    let bar = channels.interference_powers(channels.unconstrained_covariance());
    let axes: Vec<Vec<f64>> = bar
        .iter()
        .map(|&b| {
            (0..GRID_POINTS)
                .map(|j| b * j as f64 / (GRID_POINTS - 1) as f64)
                .collect()
        })
        .collect();
    let mut warm: Option<CrSolution> = None;
    let mut solve = |limits: &[f64]| -> Result<f64> {
        let sol = channels.solve_from(limits, EVAL_TOL, warm.as_ref())?;
        let log_g = sol.capacity;
        if sol.dual_mu.iter().all(|m| m.is_finite()) {
            warm = Some(sol);
        }
        Ok(log_g)
    };
    let k = cfg.k;
    let mut values = Vec::with_capacity(GRID_POINTS.pow(k as u32));
    if k == 1 {
        for &g in &axes[0] {
            values.push((solve(&[g])? - g.ln_1p()).exp());
        }
    } else {
        for &g1 in &axes[0] {
            for &g2 in &axes[1] {
                let log_g = solve(&[g1, g2])?;
                values.push((log_g - g1.ln_1p().max(g2.ln_1p())).exp());
            }
        }
    }
    let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = 1.0 + top.abs();
    let (dip, column_verdict) = if k == 1 {
        (worst_dip(&values), None)
    } else {
        let n = GRID_POINTS;
        let rows = (0..n)
            .map(|r| worst_dip(&values[r * n..(r + 1) * n]))
            .fold(0.0, f64::max);
        let cols = (0..n)
            .map(|c| worst_dip(&(0..n).map(|r| values[r * n + c]).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        (rows, Some(cols <= PLATEAU_TOL * scale))
    };
    Ok(ScanResult {
        k,
        p_db,
        axes,
        values,
        verdict: dip <= PLATEAU_TOL * scale,
        worst_dip: dip / scale,
        column_verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dips() {
        assert_eq!(worst_dip(&[1.0, 2.0, 3.0, 2.0, 1.0]), 0.0);
        assert_eq!(worst_dip(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(worst_dip(&[3.0, 1.0, 2.0]), 1.0);
        assert_eq!(worst_dip(&[]), 0.0);
    }
}
