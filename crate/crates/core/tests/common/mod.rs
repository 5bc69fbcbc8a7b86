#![allow(dead_code)]

use macrodiv_core::{PowerProfile, RealMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Profile with log-uniform entries in `[0.05, 5]`.
pub fn random_profile(n_r: usize, n: usize, seed: u64) -> PowerProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<f64> = (0..n_r * n).map(|_| 10f64.powf(rng.random_range(-1.3..0.7))).collect();
    PowerProfile::new(RealMatrix::new(n_r, n, data).unwrap()).unwrap()
}

/// Random shape with `n <= n_r <= max_n_r` and `n <= max_n`.
pub fn random_shape(rng: &mut ChaCha8Rng, max_n_r: usize, max_n: usize) -> (usize, usize) {
    let n = rng.random_range(1..=max_n);
    let n_r = rng.random_range(n..=max_n_r.max(n));
    (n_r, n)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// `n` points evenly spaced on a log scale from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
