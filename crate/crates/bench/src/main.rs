use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use secrecy_bench::config::{db_to_linear, gen_channels, parse_grid, ExperimentConfig, Mode};
use secrecy_bench::io::{code_version, write_with_manifest, ChannelFile};
use secrecy_bench::selftest::{selftest, SelftestConfig};
use secrecy_bench::{scan_surface, sweep};
use secrecy_core::baselines::p_svd_rate;
use secrecy_core::cr::{CrChannels, DEFAULT_TOL};
use secrecy_core::secrecy::{algorithm1, algorithm2, bounds, miso_solve, Eavesdropper, SecrecyProblem};

#[derive(Parser)]
#[command(
    name = "secrecy-bench",
    version,
    about = "MIMO secrecy capacity solvers and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spectrum-sharing capacity under IT limits.
    SolvePa {
        #[command(flatten)]
        common: Common,
        /// IT limit per primary user (comma list); defaults to 1 each.
        #[arg(long)]
        gamma: Option<String>,
    },
    /// Secrecy capacity with single-antenna eavesdroppers.
    Secrecy {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Algorithm::Alg1)]
        algorithm: Algorithm,
    },
    /// Lower/achievable/upper bounds for multi-antenna eavesdroppers.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Power sweep over `--p-db-grid`, averaged over trials.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Also write a gnuplot script next to `--out` (`<out>.gp`).
        #[arg(long, requires = "out")]
        gnuplot: bool,
    },
    /// F(Γ) surface on a 50-point grid per axis.
    Scan {
        #[command(flatten)]
        common: Common,
    },
    /// Invariant suites; nonzero exit on any failure.
    Selftest {
        #[command(flatten)]
        common: Common,
        /// Instances per property.
        #[arg(long, default_value_t = 5)]
        instances: usize,
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    Alg1,
    Alg2,
    Miso,
    Psvd,
}

#[derive(Args)]
struct Common {
    /// Receive antennas of the legitimate user.
    #[arg(long, default_value_t = 4)]
    m: usize,
    /// Transmit antennas.
    #[arg(long, default_value_t = 4)]
    n: usize,
    /// Eavesdroppers (primary users for solve-pa).
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Antennas per eavesdropper.
    #[arg(long, default_value_t = 1)]
    ne: usize,
    /// Transmit power for single solves and scans, dB.
    #[arg(long, default_value_t = 5.0)]
    p_db: f64,
    /// `a:b[:step]` or comma list, dB.
    #[arg(long, default_value = "0:10")]
    p_db_grid: String,
    /// Rate tolerance, nats.
    #[arg(long, default_value_t = 1e-3)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trial index used by single solves and scans.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    /// Sweep mode.
    #[arg(long, value_enum, default_value_t = Mode::Secrecy)]
    mode: Mode,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report rates in bits as well as nats.
    #[arg(long)]
    bits: bool,
    /// JSON channel file instead of generated channels.
    #[arg(long)]
    channels: Option<PathBuf>,
}

impl Common {
    fn config(&self, mode: Mode) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            m: self.m,
            n: self.n,
            k: self.k,
            ne: self.ne,
            p_db_grid: parse_grid(&self.p_db_grid)?,
            eps_rate: self.eps,
            trials: self.trials,
            seed: self.seed,
            mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// From `--channels` if given, else trial `--trial` of the generated ensemble.
    fn problem(&self, matrix_mode: bool) -> Result<(SecrecyProblem, serde_json::Value)> {
        if let Some(path) = &self.channels {
            let file = ChannelFile::read(path)?;
            return Ok((file.problem()?, json!({ "channels": path.display().to_string() })));
        }
        let cfg = self.config(Mode::Secrecy)?;
        let ch = gen_channels(&cfg, self.trial);
        let power = db_to_linear(self.p_db);
        let p = if matrix_mode {
            ch.matrix_problem(power)?
        } else {
            ch.problem(power)?
        };
        Ok((
            p,
            json!({ "config": cfg, "trial": self.trial, "p_db": self.p_db, "channel_digest": ch.digest() }),
        ))
    }

    fn rate(&self, nats: f64) -> serde_json::Value {
        if self.bits {
            json!({ "rate_nats": nats, "rate_bits": nats / std::f64::consts::LN_2 })
        } else {
            json!({ "rate_nats": nats })
        }
    }

    fn emit(&self, body: Vec<u8>, manifest: serde_json::Value) -> Result<()> {
        match &self.out {
            Some(out) => write_with_manifest(out, &body, &manifest),
            None => {
                print!("{}", String::from_utf8(body)?);
                Ok(())
            }
        }
    }

    fn emit_json(&self, value: serde_json::Value, source: serde_json::Value) -> Result<()> {
        let body = serde_json::to_string_pretty(&value)? + "\n";
        self.emit(
            body.into_bytes(),
            json!({ "code_version": code_version(), "source": source }),
        )
    }
}

fn eigen_list(v: Vec<f64>) -> serde_json::Value {
    json!(v)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SolvePa { common, gamma } => {
            let (channels, limits, source) = if let Some(path) = &common.channels {
                let file = ChannelFile::read(path)?;
                let p = file.problem()?;
                let limits = file.gamma.clone().unwrap_or_else(|| vec![1.0; p.num_eavesdroppers()]);
                let pu = p.eavesdroppers().iter().map(Eavesdropper::scaled_channel).collect();
                (
                    CrChannels::new(p.hs().clone(), pu, p.power())?,
                    limits,
                    json!({ "channels": path.display().to_string() }),
                )
            } else {
                let cfg = common.config(Mode::Pa)?;
                let ch = gen_channels(&cfg, common.trial);
                (
                    CrChannels::new(ch.hs.clone(), ch.eavesdroppers.clone(), db_to_linear(common.p_db))?,
                    vec![1.0; cfg.k],
                    json!({ "config": cfg, "trial": common.trial, "channel_digest": ch.digest() }),
                )
            };
            let limits = match &gamma {
                Some(g) => parse_grid(g).context("--gamma")?,
                None => limits,
            };
            let s = channels.solve(&limits, DEFAULT_TOL)?;
            let mut v = common.rate(s.capacity);
            v["capacity_nats"] = json!(s.capacity);
            v["limits"] = json!(limits);
            v["interference"] = json!(channels.interference_powers(&s.covariance));
            v["power_used"] = json!(s.covariance.trace());
            v["dual_lambda"] = json!(s.dual_lambda);
            v["dual_mu"] = json!(s
                .dual_mu
                .iter()
                .map(|m| if m.is_finite() { Some(*m) } else { None })
                .collect::<Vec<_>>());
            v["duality_gap"] = json!(s.duality_gap);
            v["kkt_residual"] = json!(s.kkt_residual);
            v["iterations"] = json!(s.iterations);
            v["status"] = json!(s.status);
            v["eigenvalues"] = eigen_list(s.covariance.eigenvalues());
            common.emit_json(v, source)?;
        }
        Command::Secrecy { common, algorithm } => {
            let (p, source) = common.problem(false)?;
            let eps = common.eps;
            let v = if algorithm == Algorithm::Psvd {
                let (s, r) = p_svd_rate(&p)?;
                let mut v = common.rate(r);
                v["algorithm"] = json!("psvd");
                v["eigenvalues"] = eigen_list(s.eigenvalues());
                v
            } else {
                let s = match algorithm {
                    Algorithm::Alg1 => algorithm1(&p, eps)?,
                    Algorithm::Alg2 => algorithm2(&p, eps)?,
                    _ => miso_solve(&p, eps)?,
                };
                let mut v = common.rate(s.secrecy_rate);
                v["algorithm"] = json!(match algorithm {
                    Algorithm::Alg1 => "alg1",
                    Algorithm::Alg2 => "alg2",
                    _ => "miso",
                });
                v["t_star"] = json!(s.t_star);
                v["t_upper"] = json!(s.t_upper);
                v["gamma_star"] = json!(s.gamma_star);
                v["per_eav_leakage"] = json!(s.per_eav_leakage);
                v["binding"] = json!(s.binding);
                v["iterations"] = json!(s.iterations);
                v["bisection_steps"] = json!(s.bisection_steps);
                v["status"] = json!(s.status);
                v["eigen_ratio"] = json!(s.eigen_ratio);
                v["eigenvalues"] = eigen_list(s.covariance.eigenvalues());
                v
            };
            common.emit_json(v, source)?;
        }
        Command::Bounds { common } => {
            let (p, source) = common.problem(true)?;
            let b = bounds(&p, common.eps)?;
            let mut v = json!({
                "lower_bound": b.lower_bound,
                "achievable_rate": b.achievable_rate,
                "upper_bound": b.upper_bound,
                "eps_total": b.eps_total,
                "s_lower_eigenvalues": b.s_lower.eigenvalues(),
            });
            if common.bits {
                for key in ["lower_bound", "achievable_rate", "upper_bound"] {
                    let nats = v[key].as_f64().unwrap_or(f64::NAN);
                    v[format!("{key}_bits")] = json!(nats / std::f64::consts::LN_2);
                }
            }
            common.emit_json(v, source)?;
        }
        Command::Sweep { common, gnuplot } => {
            if matches!(common.mode, Mode::Scan | Mode::Selftest) {
                bail!("sweep mode must be secrecy, pa or bounds");
            }
            let cfg = common.config(common.mode)?;
            let out = sweep(&cfg)?;
            common.emit(out.to_csv()?, serde_json::to_value(&out.manifest)?)?;
            if let (true, Some(path)) = (gnuplot, &common.out) {
                let name = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let mut gp = path.clone().into_os_string();
                gp.push(".gp");
                std::fs::write(&gp, out.gnuplot_script(&name)).with_context(|| format!("writing {gp:?}"))?;
            }
        }
        Command::Scan { common } => {
            let cfg = common.config(Mode::Scan)?;
            let s = scan_surface(&cfg, common.trial, common.p_db)?;
            eprintln!(
                "verdict: {} (worst dip {:.3e}){}",
                if s.verdict { "pass" } else { "fail" },
                s.worst_dip,
                s.column_verdict.map_or(String::new(), |c| format!(
                    ", columns {}",
                    if c { "pass" } else { "fail" }
                ))
            );
            let manifest = json!({
                "config": cfg,
                "code_version": code_version(),
                "trial": common.trial,
                "p_db": common.p_db,
                "channel_digest": gen_channels(&cfg, common.trial).digest(),
                "verdict": s.verdict,
                "worst_dip": s.worst_dip,
                "column_verdict": s.column_verdict,
            });
            common.emit(s.to_csv()?, manifest)?;
        }
        Command::Selftest {
            common,
            instances,
            corrupt_gradient,
        } => {
            let report = selftest(&SelftestConfig {
                seed: common.seed,
                instances,
                eps_rate: common.eps,
                corrupt_gradient,
            });
            let ok = report.passed();
            let text = report.render() + if ok { "selftest: pass\n" } else { "selftest: FAIL\n" };
            common.emit(
                text.into_bytes(),
                json!({ "code_version": code_version(), "report": report }),
            )?;
            return Ok(ok);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
