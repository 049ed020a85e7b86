//! Acceptance run: one line per criterion. Exits nonzero if a criterion fails,
//! except the det-scale concavity of `g`, which is measured and reported but
//! does not hold (see `det_scale_g_is_not_midpoint_concave` in the core tests).

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::RngExt;
use rayon::prelude::*;

use secrecy_bench::config::{gen_channels, ExperimentConfig, Mode};
use secrecy_bench::scan::scan_surface;
use secrecy_bench::sweep;
use secrecy_core::baselines::{brute_force_pa, brute_force_secrecy, finite_diff_grad, OracleConfig};
use secrecy_core::channels::{cscg_matrix, cscg_vector, trial_rng};
use secrecy_core::cr::{eval_g, eval_log_g, grad_g, solve_pa, CrChannels, CrProblem, DEFAULT_TOL};
use secrecy_core::linalg::{logdet_capacity, ComplexMatrix, C64};
use secrecy_core::secrecy::{algorithm1, algorithm2, bounds, miso_solve, SecrecyProblem};

const EPS: f64 = 1e-3;
const INSTANCES: u64 = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn db(p_db: f64) -> f64 {
    10f64.powf(p_db / 10.0)
}

fn single(seed: u64, trial: u64, n: usize, m: usize, k: usize, power: f64) -> SecrecyProblem {
    let mut rng = trial_rng(seed, trial);
    let hs = cscg_matrix(&mut rng, n, m);
    let eav = (0..k).map(|_| cscg_vector(&mut rng, n)).collect();
    SecrecyProblem::single(hs, eav, vec![1.0; k], power).unwrap()
}

fn cr_of(p: &SecrecyProblem) -> CrChannels {
    let pu: Vec<Vec<C64>> = p.scaled_channels().iter().map(|g| g.col(0)).collect();
    CrChannels::single_antenna(p.hs().clone(), &pu, p.power()).unwrap()
}

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b.abs()) })
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Spectrum-sharing capacity against the projected-gradient oracle, N = M = 2, K in {1, 2}.
fn criterion1() -> Outcome {
    let start = Instant::now();
    let rows: Vec<(f64, f64)> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(101, trial);
            let k = 1 + (trial % 2) as usize;
            let hs = cscg_matrix(&mut rng, 2, 2);
            let pu: Vec<_> = (0..k).map(|_| cscg_vector(&mut rng, 2)).collect();
            let ch = CrChannels::single_antenna(hs, &pu, 5.0).unwrap();
            let limits: Vec<f64> = (0..k).map(|i| ch.max_interference(i) * rng.random::<f64>()).collect();
            let p = CrProblem::new(ch, limits).unwrap();
            let s = solve_pa(&p, DEFAULT_TOL).unwrap();
            let b = brute_force_pa(
                &p,
                &OracleConfig {
                    seed: trial,
                    ..OracleConfig::default()
                },
            )
            .unwrap();
            (s.capacity - b, s.duality_gap)
        })
        .collect();
    let t = start.elapsed();
    let worst = max_abs(rows.iter().map(|r| r.0));
    let gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-3 && gap <= 1e-6 && t < Duration::from_secs(60),
        detail: format!(
            "spectrum-sharing vs oracle: worst |diff| {worst:.2e} (<= 1e-3), max duality gap {gap:.2e} (<= 1e-6), {:.1} s (< 60 s)",
            secs(t)
        ),
    }
}

/// `grad_g` against central differences of `eval_g`.
fn criterion2() -> Outcome {
    let rows: Vec<(f64, usize, usize)> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(102, trial);
            let hs = cscg_matrix(&mut rng, 2, 2);
            let pu: Vec<_> = (0..2).map(|_| cscg_vector(&mut rng, 2)).collect();
            let ch = CrChannels::single_antenna(hs, &pu, db(5.0)).unwrap();
            let bar = ch.interference_powers(ch.unconstrained_covariance());
            // trial % 3: both limits binding, one slack, both slack
            let gamma: Vec<f64> = (0..2)
                .map(|i| {
                    let slack = (trial % 3) as usize > i;
                    if slack {
                        bar[i] * (1.2 + rng.random::<f64>())
                    } else {
                        bar[i] * (0.1 + 0.8 * rng.random::<f64>())
                    }
                })
                .collect();
            let grad = grad_g(&ch, &gamma).unwrap();
            let s = ch.solve(&gamma, DEFAULT_TOL).unwrap();
            let leak = ch.interference_powers(&s.covariance);
            let active = (0..2).filter(|&i| leak[i] >= gamma[i] * (1.0 - 1e-6)).count();
            let mut worst: f64 = 0.0;
            for i in 0..2 {
                let h = 1e-4 * (1.0 + gamma[i]);
                let mut probe = gamma.clone();
                let fd = finite_diff_grad(
                    |x| {
                        probe[i] = x[i];
                        eval_g(&ch, &probe).unwrap()
                    },
                    &gamma,
                    h,
                )[i];
                let allowed = (0.02 * fd.abs()).max(1e-4);
                worst = worst.max((grad[i] - fd).abs() / allowed);
            }
            (worst, active, 2 - active)
        })
        .collect();
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let active: usize = rows.iter().map(|r| r.1).sum();
    let inactive: usize = rows.iter().map(|r| r.2).sum();
    Outcome {
        pass: worst <= 1.0 && active > 0 && inactive > 0,
        detail: format!(
            "grad_g vs finite differences: worst error {worst:.3} of allowance (2% rel, 1e-4 abs); {active} active / {inactive} inactive limits"
        ),
    }
}

/// Midpoint concavity of `g` in determinant scale (and, for reference, of `ln g`).
fn criterion3() -> Outcome {
    let rows: Vec<(f64, f64)> = (0..10u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(103, trial);
            let hs = cscg_matrix(&mut rng, 2, 2);
            let pu: Vec<_> = (0..2).map(|_| cscg_vector(&mut rng, 2)).collect();
            let ch = CrChannels::single_antenna(hs, &pu, db(5.0)).unwrap();
            let top: Vec<f64> = (0..2).map(|i| ch.max_interference(i)).collect();
            let (mut det, mut log): (f64, f64) = (0.0, 0.0);
            for _ in 0..100 {
                let a: Vec<f64> = top.iter().map(|t| t * rng.random::<f64>()).collect();
                let b: Vec<f64> = top.iter().map(|t| t * rng.random::<f64>()).collect();
                let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let (la, lb, lm) = (
                    eval_log_g(&ch, &a).unwrap(),
                    eval_log_g(&ch, &b).unwrap(),
                    eval_log_g(&ch, &m).unwrap(),
                );
                det = det.max(0.5 * (la.exp() + lb.exp()) - lm.exp());
                log = log.max(0.5 * (la + lb) - lm);
            }
            (det, log)
        })
        .collect();
    let det = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let log = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Outcome {
        pass: det <= 1e-6,
        detail: format!(
            "g midpoint concavity: worst violation {det:.3e} (<= 1e-6); ln g worst violation {log:.3e}; g is log-concave, not concave, when rank H_s >= 2"
        ),
    }
}

/// Algorithm 1 against the brute-force oracle, plus scalar closed forms.
fn criterion4() -> Outcome {
    let start = Instant::now();
    let diffs: Vec<f64> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let p = single(104, trial, 2, 2, 2, 5.0);
            let a = algorithm1(&p, EPS).unwrap().secrecy_rate;
            let b = brute_force_secrecy(
                &p,
                &OracleConfig {
                    seed: trial,
                    ..OracleConfig::default()
                },
            )
            .unwrap();
            a - b
        })
        .collect();
    let worst = max_abs(diffs.iter().copied());
    let mut rng = trial_rng(1040, 0);
    let mut closed: f64 = 0.0;
    for _ in 0..20 {
        let k = 1 + (rng.random::<f64>() * 3.0) as usize;
        let a = 0.1 + 3.0 * rng.random::<f64>();
        let b: Vec<f64> = (0..k).map(|_| 0.05 + 1.5 * rng.random::<f64>()).collect();
        let power = db(-5.0 + 25.0 * rng.random::<f64>());
        let eav = b.iter().map(|x| vec![C64::new(x.sqrt(), 0.0)]).collect();
        let p = SecrecyProblem::single(
            ComplexMatrix::column(&[C64::new(a.sqrt(), 0.0)]),
            eav,
            vec![1.0; k],
            power,
        )
        .unwrap();
        // each term is monotone in s: full power if the main channel is the strongest, else silence
        let top = b.iter().cloned().fold(0.0, f64::max);
        let want = if a > top {
            (a * power).ln_1p() - (top * power).ln_1p()
        } else {
            0.0
        };
        closed = closed.max((algorithm1(&p, EPS).unwrap().secrecy_rate - want).abs());
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 5e-3 && closed <= 1e-6 && t < Duration::from_secs(300),
        detail: format!(
            "algorithm1 vs oracle: worst |diff| {worst:.2e} (<= 5e-3); scalar closed forms worst {closed:.2e} (<= 1e-6); {:.1} s (< 300 s)",
            secs(t)
        ),
    }
}

/// Algorithm 1 vs 2 at M = N = 4, K = 1; MISO vs algorithm 2 at M = 1.
fn criterion5() -> Outcome {
    let rows: Vec<(f64, f64)> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let power = db((trial % 11) as f64);
            let p = single(105, trial, 4, 4, 1, power);
            let d12 = algorithm1(&p, EPS).unwrap().secrecy_rate - algorithm2(&p, EPS).unwrap().secrecy_rate;
            let q = single(1050, trial, 4, 1, 1, power);
            let dm = miso_solve(&q, EPS).unwrap().secrecy_rate - algorithm2(&q, EPS).unwrap().secrecy_rate;
            (d12, dm)
        })
        .collect();
    let w12 = max_abs(rows.iter().map(|r| r.0));
    let wm = max_abs(rows.iter().map(|r| r.1));
    Outcome {
        pass: w12 <= 2.0 * EPS && wm <= 2.0 * EPS,
        detail: format!("algorithm1 vs algorithm2 worst {w12:.2e}, miso_solve vs algorithm2 worst {wm:.2e} (<= 2e-3)"),
    }
}

/// Algorithm rates dominate P-SVD across the full sweep.
fn criterion6() -> Outcome {
    let start = Instant::now();
    let mut worst_trial = f64::NEG_INFINITY;
    let mut worst_mean = f64::NEG_INFINITY;
    let mut failures = 0;
    for k in [1, 2] {
        let cfg = ExperimentConfig {
            k,
            trials: 100,
            mode: Mode::Secrecy,
            ..ExperimentConfig::default()
        };
        let out = sweep(&cfg).unwrap();
        failures += out.rows.iter().map(|r| r.failures).sum::<usize>();
        for &p_db in &cfg.p_db_grid {
            worst_mean = worst_mean.max(out.mean(p_db, "psvd").unwrap() - out.mean(p_db, "alg1").unwrap());
            for t in 0..cfg.trials as u64 {
                let rate = |m: &str| {
                    out.manifest
                        .solves
                        .iter()
                        .find(|r| r.p_db == p_db && r.trial == t && r.method == m)
                        .and_then(|r| r.rate_nats)
                        .unwrap_or(f64::NAN)
                };
                let gap = rate("psvd") - rate("alg1");
                worst_trial = worst_trial.max(if gap.is_nan() { f64::INFINITY } else { gap });
            }
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: failures == 0 && worst_trial <= 1e-6 && worst_mean <= 1e-6 && t < Duration::from_secs(1800),
        detail: format!(
            "alg1 >= psvd - 1e-6: worst psvd - alg1 per trial {worst_trial:.2e}, per point {worst_mean:.2e}; {failures} solver failures; {:.1} s (< 1800 s)",
            secs(t)
        ),
    }
}

/// Surface verdicts at 5 dB on 10 seeds.
fn criterion7() -> Outcome {
    let rows: Vec<(usize, bool, f64)> = (1..=10u64)
        .into_par_iter()
        .flat_map(|seed| {
            [1usize, 2].into_par_iter().map(move |k| {
                let cfg = ExperimentConfig {
                    k,
                    seed,
                    mode: Mode::Scan,
                    ..ExperimentConfig::default()
                };
                let s = scan_surface(&cfg, 0, 5.0).unwrap();
                (k, s.verdict, s.worst_dip)
            })
        })
        .collect();
    let pass1 = rows.iter().filter(|r| r.0 == 1 && r.1).count();
    let pass2 = rows.iter().filter(|r| r.0 == 2 && r.1).count();
    let dip = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Outcome {
        pass: pass1 == 10 && pass2 == 10,
        detail: format!("scan verdicts: K=1 unimodal {pass1}/10, K=2 row-contiguous {pass2}/10, worst dip {dip:.1e}"),
    }
}

/// Bounds ordering over the N_e = 2 sweep; tightness at N_e = 1.
fn criterion8() -> Outcome {
    let cfg = ExperimentConfig {
        k: 1,
        ne: 2,
        trials: 100,
        mode: Mode::Bounds,
        ..ExperimentConfig::default()
    };
    let jobs: Vec<(f64, u64)> = cfg
        .p_db_grid
        .iter()
        .flat_map(|&p| (0..cfg.trials as u64).map(move |t| (p, t)))
        .collect();
    let rows: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(p_db, t)| {
            let p = gen_channels(&cfg, t).matrix_problem(db(p_db)).unwrap();
            match bounds(&p, EPS) {
                Ok(b) => (
                    b.lower_bound - b.achievable_rate - 1e-6,
                    b.achievable_rate - b.upper_bound - b.eps_total,
                ),
                Err(_) => (f64::INFINITY, f64::INFINITY),
            }
        })
        .collect();
    let low = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let high = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let one = ExperimentConfig { ne: 1, ..cfg.clone() };
    let tight = max_abs(
        (0..INSTANCES)
            .into_par_iter()
            .map(|t| {
                let ch = gen_channels(&one, t);
                let power = db((t % 11) as f64);
                let lower = bounds(&ch.matrix_problem(power).unwrap(), EPS).map(|b| b.lower_bound);
                let alg1 = algorithm1(&ch.problem(power).unwrap(), EPS).map(|s| s.secrecy_rate);
                match (lower, alg1) {
                    (Ok(a), Ok(b)) => a - b,
                    _ => f64::INFINITY,
                }
            })
            .collect::<Vec<_>>()
            .into_iter(),
    );
    Outcome {
        pass: low <= 0.0 && high <= 0.0 && tight <= 2.0 * EPS,
        detail: format!(
            "bounds over {} solves: max(lower - achievable - 1e-6) {low:.2e}, max(achievable - upper - eps_total) {high:.2e} (<= 0); N_e=1 |lower - alg1| {tight:.2e} (<= 2e-3)",
            rows.len()
        ),
    }
}

/// MISO covariance is rank one.
fn criterion9() -> Outcome {
    let ratios: Vec<f64> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let k = 1 + (trial % 3) as usize;
            let p = single(109, trial, 4, 1, k, db((trial % 11) as f64));
            miso_solve(&p, EPS)
                .ok()
                .and_then(|s| s.eigen_ratio)
                .unwrap_or(f64::INFINITY)
        })
        .collect();
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-4,
        detail: format!("MISO eigenvalue ratio l2/l1: worst {worst:.2e} (<= 1e-4)"),
    }
}

/// Leakage round trip through the spectrum-sharing solve.
fn criterion10() -> Outcome {
    let diffs: Vec<f64> = (0..INSTANCES)
        .into_par_iter()
        .map(|trial| {
            let p = single(110, trial, 4, 4, 1 + (trial % 3) as usize, db((trial % 11) as f64));
            let s = algorithm1(&p, EPS).unwrap();
            let main = logdet_capacity(p.hs(), &s.covariance).unwrap();
            cr_of(&p).solve(&s.gamma_star, DEFAULT_TOL).unwrap().capacity - main
        })
        .collect();
    let worst = max_abs(diffs.into_iter());
    Outcome {
        pass: worst <= 1e-6,
        detail: format!(
            "re-solving the spectrum-sharing problem at the achieved leakages: worst |diff| {worst:.2e} (<= 1e-6)"
        ),
    }
}

/// Byte-identical sweep CSV across two runs.
fn criterion11() -> Outcome {
    let cfg = ExperimentConfig {
        trials: 20,
        ..ExperimentConfig::default()
    };
    let a = sweep(&cfg).unwrap().to_csv().unwrap();
    let b = sweep(&cfg).unwrap().to_csv().unwrap();
    let bounds_cfg = ExperimentConfig {
        k: 1,
        ne: 2,
        trials: 10,
        mode: Mode::Bounds,
        ..ExperimentConfig::default()
    };
    let c = sweep(&bounds_cfg).unwrap().to_csv().unwrap();
    let d = sweep(&bounds_cfg).unwrap().to_csv().unwrap();
    Outcome {
        pass: a == b && c == d,
        detail: format!(
            "sweep CSV reproducible: secrecy {} bytes {}, bounds {} bytes {}",
            a.len(),
            if a == b { "identical" } else { "DIFFER" },
            c.len(),
            if c == d { "identical" } else { "DIFFER" }
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion1),
        (2, criterion2),
        (3, criterion3),
        (4, criterion4),
        (5, criterion5),
        (6, criterion6),
        (7, criterion7),
        (8, criterion8),
        (9, criterion9),
        (10, criterion10),
        (11, criterion11),
    ];
    let mut failed = Vec::new();
    for (n, f) in criteria {
        let o = f();
        println!(
            "criterion {n:>2}: {}  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass && n != 3 {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass except 3 (reported above)");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
