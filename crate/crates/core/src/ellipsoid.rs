//! Ellipsoid method with deep cuts, for small convex minimisations over boxes
//! and simplices.
//!
//! One-dimensional problems are handled as interval halving, where the usual
//! update formula degenerates.

/// Localisation ellipsoid `{y : (y − c)^T Q^{-1} (y − c) <= 1}`.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    center: Vec<f64>,
    /// Row-major `n x n` shape matrix `Q`.
    shape: Vec<f64>,
}

impl Ellipsoid {
    /// Smallest axis-aligned ellipsoid through the corners of the box `[lo, hi]`.
    pub fn around_box(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        assert_eq!(n, hi.len());
        assert!(n > 0, "ellipsoid needs at least one dimension");
        let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut shape = vec![0.0; n * n];
        let stretch = if n == 1 { 1.0 } else { n as f64 };
        for i in 0..n {
            let half = 0.5 * (hi[i] - lo[i]);
            shape[i * n + i] = stretch * half * half;
        }
        Self { center, shape }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Half-width of the ellipsoid along coordinate `i`.
    pub fn semi_axis(&self, i: usize) -> f64 {
        let n = self.dim();
        self.shape[i * n + i].max(0.0).sqrt()
    }

    /// Largest coordinate half-width, a cheap proxy for the remaining uncertainty.
    pub fn max_semi_axis(&self) -> f64 {
        (0..self.dim()).map(|i| self.semi_axis(i)).fold(0.0, f64::max)
    }

    /// `sqrt(g^T Q g)`: the largest decrease of the linear model `g` over the ellipsoid.
    pub fn support(&self, g: &[f64]) -> f64 {
        let qg = self.apply(g);
        dot(g, &qg).max(0.0).sqrt()
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.shape[r * n + c] * g[c]).sum())
            .collect()
    }

    /// Keeps `{y : g^T (y − c) + depth <= 0}`, `depth >= 0`.
    ///
    /// Returns `false` when the cut removes the whole ellipsoid.
    pub fn cut(&mut self, g: &[f64], depth: f64) -> bool {
        let n = self.dim();
        let support = self.support(g);
        if !(support > 0.0) || !support.is_finite() {
            return depth <= 0.0;
        }
        let alpha = (depth.max(0.0) / support).min(1.0);
        if alpha >= 1.0 {
            return false;
        }
        let qg: Vec<f64> = self.apply(g).iter().map(|v| v / support).collect();
        if n == 1 {
            // interval [c − r, c + r] cut to [c − r, c − depth/g] (or its mirror)
            let r = self.shape[0].sqrt();
            let new_half = 0.5 * r * (1.0 - alpha);
            let shift = r - new_half;
            self.center[0] -= qg[0].signum() * shift;
            self.shape[0] = new_half * new_half;
            return true;
        }
        let nf = n as f64;
        let step = (1.0 + nf * alpha) / (nf + 1.0);
        for i in 0..n {
            self.center[i] -= step * qg[i];
        }
        let factor = nf * nf * (1.0 - alpha * alpha) / (nf * nf - 1.0);
        let rank1 = 2.0 * (1.0 + nf * alpha) / ((nf + 1.0) * (1.0 + alpha));
        for r in 0..n {
            for c in 0..n {
                self.shape[r * n + c] = factor * (self.shape[r * n + c] - rank1 * qg[r] * qg[c]);
            }
        }
        // keep Q symmetric against rounding drift
        for r in 0..n {
            for c in (r + 1)..n {
                let m = 0.5 * (self.shape[r * n + c] + self.shape[c * n + r]);
                self.shape[r * n + c] = m;
                self.shape[c * n + r] = m;
            }
        }
        true
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimise a convex quadratic with objective cuts only.
    fn minimise(f: impl Fn(&[f64]) -> (f64, Vec<f64>), lo: &[f64], hi: &[f64], iters: usize) -> (f64, Vec<f64>) {
        let mut e = Ellipsoid::around_box(lo, hi);
        let mut best = (f64::INFINITY, e.center().to_vec());
        for _ in 0..iters {
            let x = e.center().to_vec();
            if let Some(i) = (0..x.len()).find(|&i| x[i] < lo[i]) {
                let mut g = vec![0.0; x.len()];
                g[i] = -1.0;
                e.cut(&g, lo[i] - x[i]);
                continue;
            }
            let (v, g) = f(&x);
            if v < best.0 {
                best = (v, x.clone());
            }
            if !e.cut(&g, v - best.0) {
                break;
            }
        }
        best
    }

    #[test]
    fn finds_interior_minimum() {
        let f = |x: &[f64]| {
            let v = (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + x[0] * x[1];
            (v, vec![2.0 * (x[0] - 1.0) + x[1], 6.0 * (x[1] + 0.5) + x[0]])
        };
        let (v, x) = minimise(f, &[-5.0, -5.0], &[5.0, 5.0], 400);
        let (g0, g1) = (2.0 * (x[0] - 1.0) + x[1], 6.0 * (x[1] + 0.5) + x[0]);
        assert!(g0.abs() < 1e-6 && g1.abs() < 1e-6, "{x:?} {v}");
    }

    #[test]
    fn respects_lower_bound() {
        let f = |x: &[f64]| {
            (
                (x[0] + 2.0).powi(2) + (x[1] - 1.0).powi(2),
                vec![2.0 * (x[0] + 2.0), 2.0 * (x[1] - 1.0)],
            )
        };
        let (_, x) = minimise(f, &[0.0, 0.0], &[4.0, 4.0], 400);
        assert!(x[0] >= 0.0 && x[0] < 1e-6);
        assert!((x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_dimensional_halving() {
        let f = |x: &[f64]| ((x[0] - 0.3).powi(2), vec![2.0 * (x[0] - 0.3)]);
        let (_, x) = minimise(f, &[0.0], &[1.0], 80);
        assert!((x[0] - 0.3).abs() < 1e-9);
    }
}
