use anyhow::{bail, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use secrecy_core::channels::{cscg_matrix, trial_rng};
use secrecy_core::linalg::ComplexMatrix;
use secrecy_core::secrecy::SecrecyProblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Secrecy,
    Pa,
    Bounds,
    Scan,
    Selftest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Receive antennas of the legitimate user (columns of `H_s`).
    pub m: usize,
    /// Transmit antennas.
    pub n: usize,
    /// Eavesdroppers (primary users in `pa` mode).
    pub k: usize,
    /// Antennas per eavesdropper.
    pub ne: usize,
    pub p_db_grid: Vec<f64>,
    /// Bisection tolerance on the rate, nats.
    pub eps_rate: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            m: 4,
            n: 4,
            k: 2,
            ne: 1,
            p_db_grid: (0..=10).map(f64::from).collect(),
            eps_rate: 1e-3,
            trials: 100,
            seed: 1,
            mode: Mode::Secrecy,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.ne == 0 {
            bail!("antenna counts must be positive");
        }
        if self.k == 0 {
            bail!("at least one eavesdropper is required");
        }
        if self.p_db_grid.is_empty() || self.p_db_grid.iter().any(|p| !p.is_finite()) {
            bail!("power grid must be non-empty and finite");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if !(self.eps_rate > 0.0) {
            bail!("eps must be positive");
        }
        Ok(())
    }
}

pub fn db_to_linear(p_db: f64) -> f64 {
    10f64.powf(p_db / 10.0)
}

/// Channels of one trial: `H_s` (`N x M`) and one `N x N_e` matrix per eavesdropper.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialChannels {
    pub hs: ComplexMatrix,
    pub eavesdroppers: Vec<ComplexMatrix>,
}

impl TrialChannels {
    /// SHA-256 over the dimensions and entries (little-endian `f64` pairs).
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for m in std::iter::once(&self.hs).chain(&self.eavesdroppers) {
            h.update((m.rows() as u64).to_le_bytes());
            h.update((m.cols() as u64).to_le_bytes());
            for z in m.as_slice() {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }

    /// Unit-noise problem; single-antenna eavesdroppers when every `N_e` is 1.
    pub fn problem(&self, power: f64) -> secrecy_core::Result<SecrecyProblem> {
        if self.eavesdroppers.iter().all(|e| e.cols() == 1) {
            let k = self.eavesdroppers.len();
            SecrecyProblem::single(
                self.hs.clone(),
                self.eavesdroppers.iter().map(|e| e.col(0)).collect(),
                vec![1.0; k],
                power,
            )
        } else {
            let noise = self.eavesdroppers.iter().map(|e| vec![1.0; e.cols()]).collect();
            SecrecyProblem::multi(self.hs.clone(), self.eavesdroppers.clone(), noise, power)
        }
    }

    /// Matrix-mode problem: one multi-antenna eavesdropper per matrix, even
    /// when `N_e = 1`.
    pub fn matrix_problem(&self, power: f64) -> secrecy_core::Result<SecrecyProblem> {
        let noise = self.eavesdroppers.iter().map(|e| vec![1.0; e.cols()]).collect();
        SecrecyProblem::multi(self.hs.clone(), self.eavesdroppers.clone(), noise, power)
    }
}

/// CSCG draws for `(cfg.seed, trial)`: `H_s` first, then the eavesdroppers,
/// each in row-major order from the trial's own stream.
pub fn gen_channels(cfg: &ExperimentConfig, trial: u64) -> TrialChannels {
    let mut rng = trial_rng(cfg.seed, trial);
    let hs = cscg_matrix(&mut rng, cfg.n, cfg.m);
    let eavesdroppers = (0..cfg.k).map(|_| cscg_matrix(&mut rng, cfg.n, cfg.ne)).collect();
    TrialChannels { hs, eavesdroppers }
}

/// `a:b:step` (inclusive) or a comma-separated list, in dB.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let s = s.trim();
    if s.contains(':') {
        let parts: Vec<f64> = s
            .split(':')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()?;
        let (a, b, step) = match parts.as_slice() {
            [a, b] => (*a, *b, 1.0),
            [a, b, step] => (*a, *b, *step),
            _ => bail!("grid range must be a:b or a:b:step"),
        };
        if !(step > 0.0) || b < a {
            bail!("grid range needs a <= b and a positive step");
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|i| a + step * i as f64).collect())
    } else {
        s.split(',')
            .filter(|x| !x.trim().is_empty())
            .map(|x| Ok(x.trim().parse::<f64>()?))
            .collect()
    }
}
