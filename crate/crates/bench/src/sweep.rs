//! Power sweeps: every `(P, trial)` pair runs the solvers of the configured
//! mode on the trial's channels; rows average over trials.

use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use secrecy_core::baselines::p_svd_rate;
use secrecy_core::cr::{CrChannels, DEFAULT_TOL};
use secrecy_core::secrecy::{algorithm1, algorithm2, bounds, miso_solve, SecrecyStatus};

use crate::config::{db_to_linear, gen_channels, ExperimentConfig, Mode};
use crate::io::{code_version, fmt12};

/// IT limit of every primary user in `pa` sweeps (the receiver noise level).
pub const PA_LIMIT: f64 = 1.0;

/// One method on one trial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveRecord {
    pub p_db: f64,
    pub trial: u64,
    pub method: String,
    pub rate_nats: Option<f64>,
    pub seconds: f64,
    /// Capacity subproblems solved (bisection methods) or solver iterations.
    pub solves: usize,
    /// Bracket wider than requested, or an iteration cap was hit.
    pub flagged: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub p_db: f64,
    pub method: String,
    pub mean_rate_nats: f64,
    pub mean_rate_bits: f64,
    pub stderr_nats: f64,
    pub trials: usize,
    pub failures: usize,
    pub flagged: usize,
    pub mean_solves: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelDigest {
    pub trial: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub code_version: String,
    pub generator: String,
    pub channel_digests: Vec<ChannelDigest>,
    /// Wall-clock and iteration counts per solve; kept out of the CSV so that
    /// the CSV is reproducible byte for byte.
    pub solves: Vec<SolveRecord>,
}

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub manifest: RunManifest,
}

impl SweepOutput {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "p_db",
            "method",
            "mean_rate_nats",
            "mean_rate_bits",
            "stderr_nats",
            "trials",
            "failures",
            "flagged",
            "mean_solves",
        ])?;
        for r in &self.rows {
            w.write_record([
                fmt12(r.p_db),
                r.method.clone(),
                fmt12(r.mean_rate_nats),
                fmt12(r.mean_rate_bits),
                fmt12(r.stderr_nats),
                r.trials.to_string(),
                r.failures.to_string(),
                r.flagged.to_string(),
                fmt12(r.mean_solves),
            ])?;
        }
        Ok(w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?)
    }

    /// Gnuplot script plotting `mean_rate_bits` against `p_db`, one curve per
    /// method, from the CSV at `csv_path`.
    pub fn gnuplot_script(&self, csv_path: &str) -> String {
        let mut methods: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !methods.contains(&r.method.as_str()) {
                methods.push(&r.method);
            }
        }
        let mut out = String::from(
            "set datafile separator ','\nset xlabel 'P (dB)'\nset ylabel 'rate (bits/channel use)'\nset key left top\nplot ",
        );
        let curves: Vec<String> = methods
            .iter()
            .map(|m| {
                format!(
                    "'{}' using 1:(strcol(2) eq '{m}' ? $4 : 1/0) every ::1 smooth unique with linespoints title '{m}'",
                    csv_path.replace('\'', "''")
                )
            })
            .collect();
        out += &curves.join(", \\\n     ");
        out.push('\n');
        out
    }

    /// Mean rate of `method` at grid point `p_db`.
    pub fn mean(&self, p_db: f64, method: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.p_db == p_db && r.method == method)
            .map(|r| r.mean_rate_nats)
    }
}

/// Method names in row order for a mode.
pub fn methods(cfg: &ExperimentConfig) -> Result<Vec<&'static str>> {
    Ok(match cfg.mode {
        Mode::Secrecy => {
            if cfg.ne != 1 {
                bail!("secrecy sweeps need single-antenna eavesdroppers (ne = 1); use bounds mode");
            }
            let mut m = vec!["alg1"];
            if cfg.k == 1 {
                m.push("alg2");
            }
            if cfg.m == 1 {
                m.push("miso");
            }
            m.push("psvd");
            m
        }
        Mode::Bounds => vec!["lower", "achievable", "upper", "psvd"],
        Mode::Pa => vec!["pa", "unconstrained"],
        Mode::Scan | Mode::Selftest => bail!("mode {:?} is not a sweep", cfg.mode),
    })
}

fn record(
    p_db: f64,
    trial: u64,
    method: &str,
    t: Instant,
    out: secrecy_core::Result<(f64, usize, bool)>,
) -> SolveRecord {
    let seconds = t.elapsed().as_secs_f64();
    match out {
        Ok((rate, solves, flagged)) => SolveRecord {
            p_db,
            trial,
            method: method.into(),
            rate_nats: Some(rate),
            seconds,
            solves,
            flagged,
            error: None,
        },
        Err(e) => SolveRecord {
            p_db,
            trial,
            method: method.into(),
            rate_nats: None,
            seconds,
            solves: 0,
            flagged: false,
            error: Some(e.to_string()),
        },
    }
}

fn run_trial(cfg: &ExperimentConfig, p_db: f64, trial: u64) -> Vec<SolveRecord> {
    let ch = gen_channels(cfg, trial);
    let power = db_to_linear(p_db);
    let eps = cfg.eps_rate;
    let mut out = Vec::new();
    let flagged = |s: SecrecyStatus| s != SecrecyStatus::Converged;
    match cfg.mode {
        Mode::Secrecy => {
            let p = ch.problem(power);
            let run = |name: &str, f: &dyn Fn() -> secrecy_core::Result<(f64, usize, bool)>| {
                let t = Instant::now();
                record(p_db, trial, name, t, f())
            };
            let p = match p {
                Ok(p) => p,
                Err(e) => {
                    let t = Instant::now();
                    return methods(cfg)
                        .unwrap_or_default()
                        .iter()
                        .map(|m| record(p_db, trial, m, t, Err(e.clone())))
                        .collect();
                }
            };
            out.push(run("alg1", &|| {
                algorithm1(&p, eps).map(|s| (s.secrecy_rate, s.iterations, flagged(s.status)))
            }));
            if cfg.k == 1 {
                out.push(run("alg2", &|| {
                    algorithm2(&p, eps).map(|s| (s.secrecy_rate, s.iterations, flagged(s.status)))
                }));
            }
            if cfg.m == 1 {
                out.push(run("miso", &|| {
                    miso_solve(&p, eps).map(|s| (s.secrecy_rate, s.iterations, flagged(s.status)))
                }));
            }
            out.push(run("psvd", &|| p_svd_rate(&p).map(|(_, r)| (r, 1, false))));
        }
        Mode::Bounds => {
            let t = Instant::now();
            let b = ch.matrix_problem(power).and_then(|p| bounds(&p, eps));
            match b {
                Ok(b) => {
                    for (name, v) in [
                        ("lower", b.lower_bound),
                        ("achievable", b.achievable_rate),
                        ("upper", b.upper_bound),
                    ] {
                        out.push(record(p_db, trial, name, t, Ok((v, 0, false))));
                    }
                }
                Err(e) => {
                    for name in ["lower", "achievable", "upper"] {
                        out.push(record(p_db, trial, name, t, Err(e.clone())));
                    }
                }
            }
            let t = Instant::now();
            let r = ch
                .matrix_problem(power)
                .and_then(|p| p_svd_rate(&p))
                .map(|(_, r)| (r, 1, false));
            out.push(record(p_db, trial, "psvd", t, r));
        }
        Mode::Pa => {
            let t = Instant::now();
            let channels = CrChannels::new(ch.hs.clone(), ch.eavesdroppers.clone(), power);
            let limits = vec![PA_LIMIT; cfg.k];
            let pa = channels.as_ref().map_err(Clone::clone).and_then(|c| {
                c.solve(&limits, DEFAULT_TOL).map(|s| {
                    (
                        s.capacity,
                        s.iterations,
                        s.status != secrecy_core::cr::SolveStatus::Converged,
                    )
                })
            });
            out.push(record(p_db, trial, "pa", t, pa));
            let t = Instant::now();
            let free = channels.map(|c| (c.unconstrained_capacity(), 0, false));
            out.push(record(p_db, trial, "unconstrained", t, free));
        }
        Mode::Scan | Mode::Selftest => {}
    }
    out
}

fn summarise(p_db: f64, method: &str, recs: &[&SolveRecord]) -> SweepRow {
    let ok: Vec<f64> = recs.iter().filter_map(|r| r.rate_nats).collect();
    let n = ok.len();
    let mean = if n > 0 {
        ok.iter().sum::<f64>() / n as f64
    } else {
        f64::NAN
    };
    let stderr = if n > 1 {
        let var = ok.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let solves = recs
        .iter()
        .filter(|r| r.rate_nats.is_some())
        .map(|r| r.solves as f64)
        .sum::<f64>();
    SweepRow {
        p_db,
        method: method.into(),
        mean_rate_nats: mean,
        mean_rate_bits: mean / std::f64::consts::LN_2,
        stderr_nats: stderr,
        trials: n,
        failures: recs.len() - n,
        flagged: recs.iter().filter(|r| r.flagged).count(),
        mean_solves: if n > 0 { solves / n as f64 } else { 0.0 },
    }
}

/// Runs the sweep. Trials execute on the rayon pool; results are assembled
/// in `(P, trial)` order, so the rows do not depend on scheduling.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let names = methods(cfg)?;
    let jobs: Vec<(usize, u64)> = (0..cfg.p_db_grid.len())
        .flat_map(|i| (0..cfg.trials as u64).map(move |t| (i, t)))
        .collect();
    let results: Vec<Vec<SolveRecord>> = jobs
        .par_iter()
        .map(|&(i, t)| run_trial(cfg, cfg.p_db_grid[i], t))
        .collect();
    let mut rows = Vec::new();
    for (i, &p_db) in cfg.p_db_grid.iter().enumerate() {
        let at: Vec<&SolveRecord> = jobs
            .iter()
            .zip(&results)
            .filter(|((j, _), _)| *j == i)
            .flat_map(|(_, r)| r)
            .collect();
        for name in &names {
            let recs: Vec<&SolveRecord> = at.iter().copied().filter(|r| r.method == *name).collect();
            rows.push(summarise(p_db, name, &recs));
        }
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        code_version: code_version(),
        generator: secrecy_core::channels::GENERATOR.into(),
        channel_digests: (0..cfg.trials as u64)
            .map(|t| ChannelDigest {
                trial: t,
                sha256: gen_channels(cfg, t).digest(),
            })
            .collect(),
        solves: results.into_iter().flatten().collect(),
    };
    Ok(SweepOutput { rows, manifest })
}
