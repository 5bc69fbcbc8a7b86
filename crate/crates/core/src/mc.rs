//! Monte Carlo ground truth: Rayleigh channel draws, exact linear receivers,
//! empirical distributions and semi-analytic SER.
//!
//! Draw `i` of a run with seed `s` uses its own generator seeded with
//! [`stream_seed`]`(s, i)`, and per-draw results are reduced in draw order,
//! so every statistic is independent of the number of worker threads.
//! `MACRODIV_THREADS` sets the worker count.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CompensatedSum;
use crate::profile::PowerProfile;
use crate::quad::Tolerance;
use crate::ser::{conditional_ser, ModulationSpec};

pub type C64 = Complex<f64>;

/// Condition number of `H^H H` above which a draw counts as singular.
pub const CONDITION_LIMIT: f64 = 1e12;
/// Smallest sample count accepted by the Monte Carlo estimators.
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Mmse,
    Zf,
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Receiver::Mmse => "mmse",
            Receiver::Zf => "zf",
        })
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mmse" => Ok(Receiver::Mmse),
            "zf" => Ok(Receiver::Zf),
            _ => Err(Error::InvalidArgument(format!("unknown receiver '{s}' (expected mmse or zf)"))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(seed) + index * 0x9E3779B97F4A7C15)`.
pub fn stream_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = std::env::var("MACRODIV_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
    })
}

/// Evaluates `f(i)` for `i in 0..n` on the worker pool, in index order.
pub fn par_map<T: Send, F: Fn(u64) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    pool().install(|| (0..n as u64).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: DMatrix<C64>,
}

impl ChannelRealization {
    pub fn n_r(&self) -> usize {
        self.h.nrows()
    }

    pub fn n(&self) -> usize {
        self.h.ncols()
    }
}

/// `H_ik = sqrt(P_ik / 2) (a + jb)` with independent standard normal `a, b`.
pub fn sample_channel(profile: &PowerProfile, seed: u64, index: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, index));
    let p = profile.matrix();
    let h = DMatrix::from_fn(p.rows(), p.cols(), |i, k| {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        C64::new(a, b) * (p.get(i, k) / 2.0).sqrt()
    });
    ChannelRealization { h }
}

fn check_user(h: &ChannelRealization, user: usize) -> Result<()> {
    if user >= h.n() {
        return Err(Error::IndexOutOfRange { index: user, len: h.n() });
    }
    Ok(())
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if !(noise_variance > 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    Ok(())
}

fn interferers(h: &ChannelRealization, user: usize) -> DMatrix<C64> {
    let cols: Vec<usize> = (0..h.n()).filter(|&k| k != user).collect();
    h.h.select_columns(&cols)
}

/// `h1^H R^-1 h1` with `R = sum_{k != user} h_k h_k^H + sigma^2 I`, by Cholesky.
pub fn mmse_sinr(h: &ChannelRealization, noise_variance: f64, user: usize) -> Result<f64> {
    check_user(h, user)?;
    check_noise(noise_variance)?;
    let h1 = h.h.column(user).into_owned();
    let h2 = interferers(h, user);
    let r = &h2 * h2.adjoint() + DMatrix::<C64>::identity(h.n_r(), h.n_r()) * C64::new(noise_variance, 0.0);
    let chol = r.cholesky().ok_or(Error::SingularChannel { condition: f64::INFINITY })?;
    let x = chol.solve(&h1);
    Ok(h1.dotc(&x).re)
}

/// Condition number of a Hermitian positive semidefinite matrix.
fn hermitian_condition(g: &DMatrix<C64>) -> f64 {
    let eig = g.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// `1 / (sigma^2 [(H^H H)^-1]_{uu})`.
pub fn zf_snr(h: &ChannelRealization, noise_variance: f64, user: usize) -> Result<f64> {
    check_user(h, user)?;
    check_noise(noise_variance)?;
    if h.n_r() < h.n() {
        return Err(Error::DimensionMismatch(format!("zero forcing needs n_r >= n, got {}x{}", h.n_r(), h.n())));
    }
    let g = h.h.adjoint() * &h.h;
    let condition = hermitian_condition(&g);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularChannel { condition });
    }
    let chol = g.cholesky().ok_or(Error::SingularChannel { condition })?;
    let mut e = DVector::<C64>::zeros(h.n());
    e[user] = C64::new(1.0, 0.0);
    let x = chol.solve(&e);
    Ok(1.0 / (noise_variance * x[user].re))
}

/// `h1^H M h1 / sigma^2` with `M` the projector onto the complement of the
/// interferer span.
pub fn zf_snr_projection(h: &ChannelRealization, noise_variance: f64, user: usize) -> Result<f64> {
    check_user(h, user)?;
    check_noise(noise_variance)?;
    let h1 = h.h.column(user).into_owned();
    let h2 = interferers(h, user);
    let energy = h1.norm_squared();
    if h2.ncols() == 0 {
        return Ok(energy / noise_variance);
    }
    let g2 = h2.adjoint() * &h2;
    let condition = hermitian_condition(&g2);
    if !(condition <= CONDITION_LIMIT) {
        return Err(Error::SingularChannel { condition });
    }
    let b = h2.adjoint() * &h1;
    let chol = g2.cholesky().ok_or(Error::SingularChannel { condition })?;
    let x = chol.solve(&b);
    Ok((energy - b.dotc(&x).re) / noise_variance)
}

pub fn receiver_statistic(receiver: Receiver, h: &ChannelRealization, noise_variance: f64, user: usize) -> Result<f64> {
    match receiver {
        Receiver::Mmse => mmse_sinr(h, noise_variance, user),
        Receiver::Zf => zf_snr(h, noise_variance, user),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
    /// Draws dropped as numerically singular.
    pub discarded: usize,
}

impl EmpiricalDistribution {
    pub fn new(mut samples: Vec<f64>, discarded: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("empirical distribution needs at least one sample".into()));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidArgument("NaN sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples, discarded })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Order statistic at level `p` (nearest rank).
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.len();
        let rank = (p * n as f64).ceil().clamp(1.0, n as f64) as usize;
        self.sorted[rank - 1]
    }

    pub fn mean(&self) -> f64 {
        let mut s = CompensatedSum::default();
        for &v in &self.sorted {
            s.add(v);
        }
        s.value() / self.len() as f64
    }

    /// Kolmogorov-Smirnov distance `sup |F_n - F|`.
    pub fn ks<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                ((i + 1) as f64 / n - f).max(f - i as f64 / n)
            })
            .fold(0.0, f64::max)
    }
}

fn check_run(profile: &PowerProfile, receiver: Receiver, user: usize, noise_variance: f64, samples: usize) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("at least {MIN_SAMPLES} samples required, got {samples}")));
    }
    if user >= profile.n() {
        return Err(Error::IndexOutOfRange { index: user, len: profile.n() });
    }
    if receiver == Receiver::Zf && profile.n_r() < profile.n() {
        return Err(Error::DimensionMismatch(format!(
            "zero forcing needs n_r >= n, got {}x{}",
            profile.n_r(),
            profile.n()
        )));
    }
    check_noise(noise_variance)
}

/// Receiver statistic of every draw, in draw order; singular draws are `None`.
pub fn sample_statistics(
    profile: &PowerProfile,
    receiver: Receiver,
    user: usize,
    noise_variance: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    check_run(profile, receiver, user, noise_variance, samples)?;
    let out = par_map(samples, |i| {
        let h = sample_channel(profile, seed, i);
        match receiver_statistic(receiver, &h, noise_variance, user) {
            Ok(v) => Ok(Some(v)),
            Err(Error::SingularChannel { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    out.into_iter().collect()
}

/// Drops singular draws; every draw singular is itself a [`Error::SingularChannel`].
fn split_discards(values: Vec<Option<f64>>) -> Result<(Vec<f64>, usize)> {
    let total = values.len();
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let discarded = total - kept.len();
    if kept.is_empty() {
        return Err(Error::SingularChannel { condition: f64::INFINITY });
    }
    if discarded > 0 {
        log::warn!("discarded {discarded} singular channel draws");
    }
    Ok((kept, discarded))
}

pub fn empirical_cdf(
    profile: &PowerProfile,
    receiver: Receiver,
    user: usize,
    noise_variance: f64,
    samples: usize,
    seed: u64,
) -> Result<EmpiricalDistribution> {
    let (kept, discarded) = split_discards(sample_statistics(profile, receiver, user, noise_variance, samples, seed)?)?;
    EmpiricalDistribution::new(kept, discarded)
}

/// Mean of the exact conditional SEP over channel draws, with its standard error.
pub fn semi_analytic_ser(
    profile: &PowerProfile,
    receiver: Receiver,
    user: usize,
    noise_variance: f64,
    modulation: &ModulationSpec,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    check_run(profile, receiver, user, noise_variance, samples)?;
    let values = par_map(samples, |i| {
        let h = sample_channel(profile, seed, i);
        match receiver_statistic(receiver, &h, noise_variance, user) {
            Ok(snr) => conditional_ser(snr, modulation, Tolerance::RELAXED).map(Some),
            Err(Error::SingularChannel { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let (kept, _) = split_discards(values.into_iter().collect::<Result<Vec<_>>>()?)?;
    let n = kept.len() as f64;
    let mut sum = CompensatedSum::default();
    for &v in &kept {
        sum.add(v);
    }
    let mean = sum.value() / n;
    let mut sq = CompensatedSum::default();
    for &v in &kept {
        sq.add((v - mean) * (v - mean));
    }
    let std_error = (sq.value() / (n - 1.0) / n).sqrt();
    Ok((mean, std_error))
}
