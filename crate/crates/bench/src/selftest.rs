//! Invariant suites of every module at `N <= 4`, one report line per property.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use secrecy_core::baselines::{brute_force_pa, brute_force_secrecy, finite_diff_grad, p_svd_rate, OracleConfig};
use secrecy_core::channels::{cscg, cscg_matrix, cscg_vector, trial_rng};
use secrecy_core::cr::{eval_log_g, grad_g, solve_pa, CrChannels, CrProblem, SolveStatus, DEFAULT_TOL};
use secrecy_core::linalg::{
    eigh, logdet_capacity, penalized_waterfill, penalized_waterfill_objective, whiten_inv_sqrt, ComplexMatrix,
    HermitianMatrix, PsdMatrix,
};
use secrecy_core::secrecy::{algorithm1, algorithm2, bounds, miso_solve, secrecy_rate, SecrecyProblem};

use crate::config::ExperimentConfig;
use crate::scan::scan_surface;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SelftestConfig {
    pub seed: u64,
    /// Random instances per property.
    pub instances: usize,
    pub eps_rate: f64,
    /// Negative control: scales `grad_g` before it is compared.
    pub corrupt_gradient: bool,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            instances: 5,
            eps_rate: 1e-3,
            corrupt_gradient: false,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest residual seen (same units as `tolerance`).
    pub worst: f64,
    pub tolerance: f64,
    /// Informational checks are reported but do not fail the run.
    pub gating: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.gating)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match (c.passed, c.gating) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "INFO",
            };
            out += &format!("{tag}  {:<40} worst {:.3e}  tol {:.1e}\n", c.name, c.worst, c.tolerance);
        }
        out
    }
}

fn check(name: &str, worst: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        passed: worst <= tolerance,
        worst,
        tolerance,
        gating: true,
    }
}

fn rng(cfg: &SelftestConfig, suite: u64, i: usize) -> ChaCha8Rng {
    trial_rng(cfg.seed.wrapping_mul(1000).wrapping_add(suite), i as u64)
}

fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let a = cscg_matrix(r, n, n);
    HermitianMatrix::new((&a + &a.adjoint()).scale(0.5)).expect("symmetrised")
}

fn random_psd(r: &mut ChaCha8Rng, n: usize, trace: f64) -> PsdMatrix {
    let w = cscg_matrix(r, n, n);
    let g = w.mul_adjoint(&w).hermitian_part();
    let t = g.trace().re;
    PsdMatrix::from_matrix(g.scale(trace / t)).expect("gram matrix")
}

fn single(hs: ComplexMatrix, eav: Vec<Vec<secrecy_core::linalg::C64>>, power: f64) -> SecrecyProblem {
    let k = eav.len();
    SecrecyProblem::single(hs, eav, vec![1.0; k], power).expect("valid instance")
}

pub fn selftest(cfg: &SelftestConfig) -> Report {
    let mut checks = Vec::new();
    let n_inst = cfg.instances.max(1);
    let eps = cfg.eps_rate;

    // eigendecomposition residuals
    let mut worst: f64 = 0.0;
    for i in 0..40 * n_inst {
        let mut r = rng(cfg, 1, i);
        let a = random_hermitian(&mut r, 1 + i % 8);
        let e = eigh(&a);
        let recon = (a.as_matrix() - &e.reconstruct()).frobenius_norm() / (1.0 + a.as_matrix().frobenius_norm());
        let u = &e.eigenvectors;
        let unit = (&u.adjoint_mul(u) - &ComplexMatrix::identity(a.dim())).frobenius_norm();
        let sorted = e.eigenvalues.windows(2).all(|w| w[0] >= w[1]);
        worst = worst.max(recon).max(unit).max(if sorted { 0.0 } else { 1.0 });
    }
    checks.push(check("eigh reconstruction and unitarity", worst, 1e-9));

    // log-det monotone in the PSD order
    let mut worst: f64 = 0.0;
    for i in 0..10 * n_inst {
        let mut r = rng(cfg, 2, i);
        let h = cscg_matrix(&mut r, 4, 3);
        let s = random_psd(&mut r, 4, 2.0);
        let v = cscg_vector(&mut r, 4);
        let vv = ComplexMatrix::column(&v).mul_adjoint(&ComplexMatrix::column(&v));
        let bigger = PsdMatrix::from_matrix((s.as_matrix() + &vv).hermitian_part()).expect("psd sum");
        let drop = logdet_capacity(&h, &s).unwrap_or(f64::NAN) - logdet_capacity(&h, &bigger).unwrap_or(f64::NAN);
        worst = worst.max(if drop.is_nan() { f64::INFINITY } else { drop });
    }
    checks.push(check("logdet monotone in PSD order", worst, 1e-12));

    // penalized water-filling is a maximiser
    let mut worst: f64 = 0.0;
    for i in 0..20 * n_inst {
        let mut r = rng(cfg, 3, i);
        let gains: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 5.0).collect();
        let p = penalized_waterfill(&gains);
        let base = penalized_waterfill_objective(&gains, &p);
        for _ in 0..20 {
            let q: Vec<f64> = p
                .iter()
                .map(|x| (x + 0.1 * (r.random::<f64>() - 0.5)).max(0.0))
                .collect();
            worst = worst.max(penalized_waterfill_objective(&gains, &q) - base);
        }
    }
    checks.push(check("penalized water-filling optimality", worst, 1e-9));

    // whitening: W A_f W = I
    let mut worst: f64 = 0.0;
    for i in 0..10 * n_inst {
        let mut r = rng(cfg, 4, i);
        let a = random_psd(&mut r, 4, 4.0);
        let h = a.hermitian();
        let floor = 1e-6;
        let Ok(w) = whiten_inv_sqrt(h, floor) else {
            worst = f64::INFINITY;
            continue;
        };
        let lifted = eigh(h).reconstruct_with(|l| l.max(floor));
        let id = &(&w * &lifted) * &w;
        worst = worst.max((&id - &ComplexMatrix::identity(4)).frobenius_norm());
    }
    checks.push(check("whitening W A_f W = I", worst, 1e-8));

    // spectrum-sharing primal-dual invariants on 4x4, K = 2
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 5, i);
        let hs = cscg_matrix(&mut r, 4, 4);
        let pu: Vec<_> = (0..2).map(|_| cscg_vector(&mut r, 4)).collect();
        let power = 0.5 + 10.0 * r.random::<f64>();
        let limits: Vec<f64> = (0..2).map(|_| 3.0 * r.random::<f64>()).collect();
        let Ok(ch) = CrChannels::single_antenna(hs, &pu, power) else {
            worst = f64::INFINITY;
            continue;
        };
        let Ok(s) = solve_pa(&CrProblem::new(ch.clone(), limits.clone()).expect("sizes"), DEFAULT_TOL) else {
            worst = f64::INFINITY;
            continue;
        };
        let leak = ch.interference_powers(&s.covariance);
        let mut res: f64 = (s.covariance.trace() - power * (1.0 + 1e-6)).max(0.0);
        for j in 0..2 {
            res = res.max((leak[j] - limits[j] - 1e-6 * (1.0 + limits[j])).max(0.0));
            if s.dual_mu[j].is_finite() {
                res = res.max((s.dual_mu[j] * (limits[j] - leak[j]) - 1e-4 * (1.0 + limits[j])).max(0.0));
            }
        }
        res = res.max((s.dual_lambda * (power - s.covariance.trace()) - 1e-4 * (1.0 + power)).max(0.0));
        res = res.max((s.duality_gap - DEFAULT_TOL).max(0.0));
        res = res.max((s.kkt_residual - 1e-4).max(0.0));
        if s.status != SolveStatus::Converged {
            res = f64::INFINITY;
        }
        worst = worst.max(res);
    }
    checks.push(check("spectrum-sharing feasibility, slackness, gap, KKT", worst, 0.0));

    // spectrum-sharing capacity against the projected-gradient oracle
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 6, i);
        let k = 1 + i % 2;
        let hs = cscg_matrix(&mut r, 2, 2);
        let pu: Vec<_> = (0..k).map(|_| cscg_vector(&mut r, 2)).collect();
        let limits: Vec<f64> = (0..k).map(|_| 0.1 + 2.0 * r.random::<f64>()).collect();
        let p = CrProblem::new(CrChannels::single_antenna(hs, &pu, 5.0).expect("instance"), limits).expect("sizes");
        let a = solve_pa(&p, DEFAULT_TOL).map(|s| s.capacity);
        let b = brute_force_pa(&p, &OracleConfig::default());
        worst = worst.max(match (a, b) {
            (Ok(a), Ok(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        });
    }
    checks.push(check("spectrum-sharing vs projected-gradient oracle", worst, 1e-3));

    // gradient of g against finite differences
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 7, i);
        let hs = cscg_matrix(&mut r, 2, 2);
        let pu: Vec<_> = (0..2).map(|_| cscg_vector(&mut r, 2)).collect();
        let ch = CrChannels::single_antenna(hs, &pu, 3.0).expect("instance");
        let free = ch.interference_powers(ch.unconstrained_covariance());
        // one limit binding, one slack
        let gamma = vec![0.3 * free[0] + 0.05, free[1] * 1.5 + 0.1];
        let Ok(mut grad) = grad_g(&ch, &gamma) else {
            worst = f64::INFINITY;
            continue;
        };
        if cfg.corrupt_gradient {
            grad.iter_mut().for_each(|g| *g = *g * 1.5 + 0.01);
        }
        let h = 1e-4 * (1.0 + gamma.iter().cloned().fold(0.0, f64::max));
        let fd = finite_diff_grad(|x| eval_log_g(&ch, x).map(f64::exp).unwrap_or(f64::NAN), &gamma, h);
        for (a, b) in grad.iter().zip(&fd) {
            let err = (a - b).abs() / (0.02 * b.abs()).max(1e-4);
            worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
        }
    }
    checks.push(check("grad_g vs finite differences (scaled)", worst, 1.0));

    // shape of g: monotone, ln g concave; g itself is reported only
    let (mut mono, mut log_conc, mut det_conc): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i in 0..n_inst {
        let mut r = rng(cfg, 8, i);
        let hs = cscg_matrix(&mut r, 2, 2);
        let pu: Vec<_> = (0..2).map(|_| cscg_vector(&mut r, 2)).collect();
        let ch = CrChannels::single_antenna(hs, &pu, 10f64.sqrt()).expect("instance");
        let top: Vec<f64> = (0..2).map(|j| ch.max_interference(j)).collect();
        for _ in 0..20 {
            let a: Vec<f64> = top.iter().map(|t| t * r.random::<f64>()).collect();
            let b: Vec<f64> = top.iter().map(|t| t * r.random::<f64>()).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let up: Vec<f64> = a.iter().map(|x| x + 0.1 * r.random::<f64>()).collect();
            let (Ok(la), Ok(lb), Ok(lm), Ok(lu)) = (
                eval_log_g(&ch, &a),
                eval_log_g(&ch, &b),
                eval_log_g(&ch, &m),
                eval_log_g(&ch, &up),
            ) else {
                mono = f64::INFINITY;
                continue;
            };
            mono = mono.max(la - lu);
            log_conc = log_conc.max(0.5 * (la + lb) - lm);
            det_conc = det_conc.max(0.5 * (la.exp() + lb.exp()) - lm.exp());
        }
    }
    checks.push(check("g monotone in each limit", mono, 1e-9));
    checks.push(check("ln g midpoint concavity", log_conc, 1e-9));
    let mut det = check("g midpoint concavity (rank >= 2: not expected)", det_conc, 1e-6);
    det.gating = false;
    checks.push(det);

    // secrecy: algorithm 1 against the brute-force oracle, 2x2, K = 2
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 9, i);
        let hs = cscg_matrix(&mut r, 2, 2);
        let eav: Vec<_> = (0..2).map(|_| cscg_vector(&mut r, 2)).collect();
        let p = single(hs, eav, 10f64.sqrt());
        let a = algorithm1(&p, eps).map(|s| s.secrecy_rate);
        let b = brute_force_secrecy(
            &p,
            &OracleConfig {
                seed: i as u64,
                ..OracleConfig::default()
            },
        );
        worst = worst.max(match (a, b) {
            (Ok(a), Ok(b)) => (a - b).abs(),
            _ => f64::INFINITY,
        });
    }
    checks.push(check("algorithm1 vs brute-force oracle", worst, 5e-3));

    // solution invariants and Props. 1, 2 on 4x4, K = 2, plus P-SVD dominance
    let (mut inv, mut prop1, mut dom, mut null): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n_inst {
        let mut r = rng(cfg, 10, i);
        let hs = cscg_matrix(&mut r, 4, 4);
        let eav: Vec<_> = (0..2).map(|_| cscg_vector(&mut r, 4)).collect();
        let p = single(hs.clone(), eav.clone(), 10f64.powf(0.1 * (i % 11) as f64));
        let (Ok(s), Ok((sp, rp))) = (algorithm1(&p, eps), p_svd_rate(&p)) else {
            inv = f64::INFINITY;
            continue;
        };
        let rate = secrecy_rate(&s.covariance, &p).unwrap_or(f64::NAN);
        inv = inv
            .max((rate - s.secrecy_rate).abs() / 1e-9)
            .max((s.t_star.ln() - s.secrecy_rate).abs() / eps)
            .max((s.covariance.trace() - p.power()) / (1e-6 * p.power()));
        if let Ok(ch) = CrChannels::single_antenna(hs, &eav, p.power()) {
            let main = logdet_capacity(p.hs(), &s.covariance).unwrap_or(f64::NAN);
            let again = ch
                .solve(&s.gamma_star, DEFAULT_TOL)
                .map(|x| x.capacity)
                .unwrap_or(f64::NAN);
            prop1 = prop1.max((again - main).abs());
        }
        dom = dom.max(rp - s.secrecy_rate);
        for h in &eav {
            null = null.max(sp.as_matrix().quad_form(h));
        }
    }
    checks.push(check("secrecy solution invariants (scaled)", inv, 1.0));
    checks.push(check(
        "leakage round trip through the spectrum-sharing solve",
        prop1,
        1e-6,
    ));
    checks.push(check("P-SVD below algorithm1", dom, 1e-6));
    checks.push(check("P-SVD nulls every eavesdropper", null, 1e-10));

    // one eavesdropper: algorithms 1 and 2, 4x4
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 11, i);
        let hs = cscg_matrix(&mut r, 4, 4);
        let p = single(hs, vec![cscg_vector(&mut r, 4)], 10f64.sqrt());
        worst = worst.max(match (algorithm1(&p, eps), algorithm2(&p, eps)) {
            (Ok(a), Ok(b)) => (a.secrecy_rate - b.secrecy_rate).abs(),
            _ => f64::INFINITY,
        });
    }
    checks.push(check("algorithm1 vs algorithm2 (K = 1)", worst, 2.0 * eps));

    // MISO: agreement with algorithm 2 and rank one
    let (mut agree, mut rank): (f64, f64) = (0.0, 0.0);
    for i in 0..n_inst {
        let mut r = rng(cfg, 12, i);
        let hs = cscg_matrix(&mut r, 4, 1);
        let e1 = single(hs.clone(), vec![cscg_vector(&mut r, 4)], 10f64.sqrt());
        agree = agree.max(match (miso_solve(&e1, eps), algorithm2(&e1, eps)) {
            (Ok(a), Ok(b)) => (a.secrecy_rate - b.secrecy_rate).abs(),
            _ => f64::INFINITY,
        });
        let e2 = single(hs, (0..2).map(|_| cscg_vector(&mut r, 4)).collect(), 10f64.sqrt());
        rank = rank.max(
            miso_solve(&e2, eps)
                .ok()
                .and_then(|s| s.eigen_ratio)
                .unwrap_or(f64::INFINITY),
        );
    }
    checks.push(check("miso_solve vs algorithm2", agree, 2.0 * eps));
    checks.push(check("MISO covariance rank one (l2/l1)", rank, 1e-4));

    // multi-antenna bounds ordering, 4x4, N_e = 2
    let mut worst: f64 = 0.0;
    for i in 0..n_inst {
        let mut r = rng(cfg, 13, i);
        let hs = cscg_matrix(&mut r, 4, 4);
        let he = cscg_matrix(&mut r, 4, 2);
        let p = SecrecyProblem::multi(hs, vec![he], vec![vec![1.0, 1.0]], 10f64.sqrt()).expect("instance");
        worst = worst.max(match bounds(&p, eps) {
            Ok(b) => (b.lower_bound - b.achievable_rate - 1e-6)
                .max(b.achievable_rate - b.upper_bound - b.eps_total)
                .max(0.0),
            Err(_) => f64::INFINITY,
        });
    }
    checks.push(check("bounds: lower <= achievable <= upper", worst, 0.0));

    // surface shape at 5 dB, M = N = 4
    let (mut uni, mut contig): (f64, f64) = (0.0, 0.0);
    for i in 0..n_inst.min(3) {
        for k in [1usize, 2] {
            let sc = ExperimentConfig {
                k,
                seed: cfg.seed.wrapping_add(i as u64),
                ..ExperimentConfig::default()
            };
            match scan_surface(&sc, 0, 5.0) {
                Ok(s) if k == 1 => uni = uni.max(s.worst_dip),
                Ok(s) => contig = contig.max(s.worst_dip),
                Err(_) => uni = f64::INFINITY,
            }
        }
    }
    checks.push(check("F unimodal (K = 1, 5 dB)", uni, crate::scan::PLATEAU_TOL));
    checks.push(check(
        "min F_i rows contiguous (K = 2, 5 dB)",
        contig,
        crate::scan::PLATEAU_TOL,
    ));

    // CSCG draws: zero mean, unit variance
    let mut r = rng(cfg, 14, 0);
    let n = 100_000;
    let draws: Vec<_> = (0..n).map(|_| cscg(&mut r)).collect();
    let mean = draws.iter().sum::<secrecy_core::linalg::C64>() / n as f64;
    let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64;
    checks.push(check("CSCG mean", mean.norm(), 0.02));
    checks.push(check("CSCG variance deviation", (var - 1.0).abs(), 0.02));

    // oracle determinism
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let hs = cscg_matrix(&mut r, 2, 2);
    let p = single(hs, vec![cscg_vector(&mut r, 2)], 2.0);
    let oc = OracleConfig {
        restarts: 4,
        max_iters: 50,
        seed: 9,
        ..OracleConfig::default()
    };
    let same = match (brute_force_secrecy(&p, &oc), brute_force_secrecy(&p, &oc)) {
        (Ok(a), Ok(b)) if a.to_bits() == b.to_bits() => 0.0,
        _ => 1.0,
    };
    checks.push(check("oracle determinism", same, 0.0));

    Report { checks }
}
