//! Seeded circularly-symmetric complex Gaussian channel draws.
//!
//! Each `(seed, trial)` pair owns one ChaCha8 stream, and matrix entries are
//! drawn from it in row-major order, so any entry is a fixed function of
//! `(seed, trial, position)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{ComplexMatrix, C64};

/// Name recorded in run manifests.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.10), one stream per trial, StandardNormal (rand_distr ziggurat)";

pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One CSCG sample: real and imaginary parts independent with variance 1/2.
pub fn cscg(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cscg_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| cscg(rng))
}

pub fn cscg_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| cscg(rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_draws() {
        let a = cscg_matrix(&mut trial_rng(7, 3), 4, 4);
        let b = cscg_matrix(&mut trial_rng(7, 3), 4, 4);
        assert_eq!(a, b);
        assert_ne!(a, cscg_matrix(&mut trial_rng(7, 4), 4, 4));
    }

    #[test]
    fn unit_power_zero_mean() {
        let mut rng = trial_rng(1, 0);
        let n = 100_000;
        let draws: Vec<C64> = (0..n).map(|_| cscg(&mut rng)).collect();
        let mean = draws.iter().sum::<C64>() / n as f64;
        let var = draws.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64;
        assert!(mean.norm() <= 0.02, "{mean}");
        assert!((0.98..=1.02).contains(&var), "{var}");
    }
}
