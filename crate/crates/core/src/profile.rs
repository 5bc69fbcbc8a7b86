//! Average link-power profiles, per-user views and the edge-excited-cell drop
//! generator.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

pub const PROFILE_FORMAT: &str = "macrodiv-profile-v1";
pub const SCENARIO_FORMAT: &str = "macrodiv-scenario-v1";

/// `n_r x n` matrix of average link powers `P_ik` (linear units). Column `k`
/// belongs to user `k`, row `i` to receive antenna `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    p: RealMatrix,
}

impl PowerProfile {
    pub fn new(p: RealMatrix) -> Result<Self> {
        if p.as_slice().iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument("link powers must be nonnegative".into()));
        }
        for j in 0..p.cols() {
            if p.column(j).iter().all(|&x| x <= 0.0) {
                return Err(Error::ZeroColumn(j));
            }
        }
        Ok(Self { p })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(RealMatrix::from_rows(rows)?)
    }

    /// Receive antennas.
    pub fn n_r(&self) -> usize {
        self.p.rows()
    }

    /// Users.
    pub fn n(&self) -> usize {
        self.p.cols()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.p
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.p.get(i, k)
    }

    pub fn require_analyzable(&self) -> Result<()> {
        if self.n_r() < self.n() {
            return Err(Error::DimensionMismatch(format!(
                "analysis needs n_r >= n, got n_r={} n={}",
                self.n_r(),
                self.n()
            )));
        }
        Ok(())
    }

    pub fn scale_column(&self, user: usize, factor: f64) -> Result<Self> {
        let mut d = vec![1.0; self.n()];
        *d.get_mut(user).ok_or(Error::IndexOutOfRange { index: user, len: self.n() })? = factor;
        Self::new(self.p.scale_cols(&d))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ProfileFile {
            format: PROFILE_FORMAT.to_string(),
            n_r: self.n_r(),
            n: self.n(),
            p: (0..self.n_r()).map(|i| self.p.row(i).to_vec()).collect(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(text)?;
        if file.format != PROFILE_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{PROFILE_FORMAT}`, found `{}`",
                file.format
            )));
        }
        if file.p.len() != file.n_r || file.p.iter().any(|r| r.len() != file.n) {
            return Err(Error::Format(format!(
                "matrix shape does not match n_r={} n={}",
                file.n_r, file.n
            )));
        }
        Self::new(RealMatrix::new(file.n_r, file.n, file.p.concat())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileFile {
    format: String,
    n_r: usize,
    n: usize,
    p: Vec<Vec<f64>>,
}

/// One user's slice of a profile: the desired column `p1` (diagonal of `P_1`)
/// and the interferer matrix `Q_2` (remaining columns, original order).
#[derive(Debug, Clone, PartialEq)]
pub struct UserView {
    pub user: usize,
    pub p1: Vec<f64>,
    pub q2: RealMatrix,
}

impl UserView {
    pub fn n_r(&self) -> usize {
        self.p1.len()
    }

    /// Users including the desired one.
    pub fn n(&self) -> usize {
        self.q2.cols() + 1
    }

    /// `n_r - n + 1`, the ZF diversity order.
    pub fn diversity(&self) -> usize {
        self.n_r() + 1 - self.n()
    }

    pub fn require_analyzable(&self) -> Result<()> {
        if self.n_r() < self.n() {
            return Err(Error::DimensionMismatch(format!(
                "analysis needs n_r >= n, got n_r={} n={}",
                self.n_r(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Checks that `P_1` is invertible (every desired-link power positive).
    pub fn require_invertible(&self) -> Result<()> {
        if let Some(i) = self.p1.iter().position(|&x| x <= 0.0) {
            return Err(Error::SingularProfile(format!(
                "user {} has zero power on antenna {i}",
                self.user
            )));
        }
        Ok(())
    }

    /// `|P_1|`.
    pub fn p1_det(&self) -> f64 {
        self.p1.iter().product()
    }

    /// `P_1^{-1} Q_2`.
    pub fn whitened_interference(&self) -> RealMatrix {
        let inv: Vec<f64> = self.p1.iter().map(|x| 1.0 / x).collect();
        self.q2.scale_rows(&inv)
    }
}

pub fn user_view(profile: &PowerProfile, user: usize) -> Result<UserView> {
    if user >= profile.n() {
        return Err(Error::IndexOutOfRange { index: user, len: profile.n() });
    }
    let others: Vec<usize> = (0..profile.n()).filter(|&k| k != user).collect();
    Ok(UserView {
        user,
        p1: profile.p.column(user),
        q2: profile.p.select_cols(&others),
    })
}

/// Divides every column by its sum.
pub fn normalize_columns(profile: &PowerProfile) -> Result<PowerProfile> {
    let sums = profile.p.column_sums();
    if let Some(j) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroColumn(j));
    }
    let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s).collect();
    PowerProfile::new(profile.p.scale_cols(&inv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinProfile {
    /// Unequal-power 3x3 macrodiversity example.
    Macro,
    /// Equal-power 3x3 point-to-point example.
    PointToPoint,
    /// 6x4 drop with two antennas per base station.
    D4,
}

impl BuiltinProfile {
    pub fn name(self) -> &'static str {
        match self {
            BuiltinProfile::Macro => "P_M",
            BuiltinProfile::PointToPoint => "P_P",
            BuiltinProfile::D4 => "P_D4",
        }
    }
}

impl std::str::FromStr for BuiltinProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P_M" => Ok(BuiltinProfile::Macro),
            "P_P" => Ok(BuiltinProfile::PointToPoint),
            "P_D4" => Ok(BuiltinProfile::D4),
            other => Err(Error::UnknownProfile(other.to_string())),
        }
    }
}

pub fn builtin_profile(which: BuiltinProfile) -> PowerProfile {
    let rows: &[&[f64]] = match which {
        BuiltinProfile::Macro => &[
            &[0.3500, 0.0117, 0.1225],
            &[0.6292, 0.9282, 0.0741],
            &[0.0208, 0.0601, 0.8035],
        ],
        BuiltinProfile::PointToPoint => &[&[0.3333; 3], &[0.3333; 3], &[0.3333; 3]],
        BuiltinProfile::D4 => &[
            &[0.2061, 1.3941, 1.1034, 4.6938],
            &[0.2061, 1.3941, 1.1034, 4.6938],
            &[2.2923, 16.8146, 0.0857, 0.6790],
            &[2.2923, 16.8146, 0.0857, 0.6790],
            &[0.8361, 3.4834, 2.8181, 0.6700],
            &[0.8361, 3.4834, 2.8181, 0.6700],
        ],
    };
    PowerProfile::from_rows(rows).expect("built-in profiles are valid")
}

pub fn builtin_profile_by_name(name: &str) -> Result<PowerProfile> {
    Ok(builtin_profile(name.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Calibration {
    pub threshold_db: f64,
    pub quantile: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Self { threshold_db: 3.0, quantile: 0.95 }
    }
}

/// Multi-cell drop geometry. Base stations each carry `antennas_per_bs`
/// co-located antennas; users are dropped uniformly in the convex polygon
/// `user_region`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub bs_positions: Vec<[f64; 2]>,
    pub antennas_per_bs: usize,
    pub user_region: Vec<[f64; 2]>,
    pub users: usize,
    pub shadowing_std_db: f64,
    pub pathloss_exponent: f64,
    pub calibration: Calibration,
    pub cell_radius: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self::edge_excited(1, 3)
    }
}

impl Scenario {
    /// Three base stations on the vertices of an equilateral triangle with
    /// circumradius 1, users dropped inside the triangle.
    pub fn edge_excited(antennas_per_bs: usize, users: usize) -> Self {
        let radius = 1.0;
        let vertices: Vec<[f64; 2]> = (0..3)
            .map(|i| {
                let a = PI / 2.0 + 2.0 * PI * i as f64 / 3.0;
                [radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self {
            bs_positions: vertices.clone(),
            antennas_per_bs,
            user_region: vertices,
            users,
            shadowing_std_db: 8.0,
            pathloss_exponent: 3.5,
            calibration: Calibration::default(),
            cell_radius: radius,
        }
    }

    pub fn n_r(&self) -> usize {
        self.bs_positions.len() * self.antennas_per_bs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(format!("scenario: {msg}")));
        if self.bs_positions.is_empty() || self.antennas_per_bs == 0 {
            return bad("need at least one base station antenna");
        }
        if self.user_region.len() < 3 {
            return bad("user region needs at least three vertices");
        }
        if self.users == 0 {
            return bad("need at least one user");
        }
        if !(self.shadowing_std_db >= 0.0) {
            return bad("shadowing_std_db must be >= 0");
        }
        if !(self.pathloss_exponent > 2.0) {
            return bad("pathloss_exponent must exceed 2");
        }
        let q = self.calibration.quantile;
        if !(q > 0.0 && q < 1.0) {
            return bad("calibration quantile must lie in (0, 1)");
        }
        if !(self.cell_radius > 0.0) {
            return bad("cell_radius must be positive");
        }
        Ok(())
    }

    fn min_distance(&self) -> f64 {
        0.01 * self.cell_radius
    }

    fn distance(&self, bs: usize, pos: [f64; 2]) -> f64 {
        let [bx, by] = self.bs_positions[bs];
        (pos[0] - bx).hypot(pos[1] - by).max(self.min_distance())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ScenarioFile { format: SCENARIO_FORMAT.to_string(), scenario: self.clone() };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.format != SCENARIO_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{SCENARIO_FORMAT}`, found `{}`",
                file.format
            )));
        }
        file.scenario.validate()?;
        Ok(file.scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScenarioFile {
    format: String,
    #[serde(flatten)]
    scenario: Scenario,
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Probability that the strongest base-station signal exceeds the
/// calibration threshold, for transmit power `t_db` (dB) at the given position.
fn exceedance_probability(scenario: &Scenario, pos: [f64; 2], noise_variance: f64, t_db: f64) -> f64 {
    let sigma = scenario.shadowing_std_db;
    let noise_db = 10.0 * noise_variance.log10();
    let mut all_below = 1.0;
    for b in 0..scenario.bs_positions.len() {
        let gain_db = -10.0 * scenario.pathloss_exponent * scenario.distance(b, pos).log10();
        let margin = scenario.calibration.threshold_db - (t_db + gain_db - noise_db);
        all_below *= std_normal_cdf(margin / sigma);
    }
    1.0 - all_below
}

/// Smallest transmit power `T` for which the best base-station SNR,
/// `T d^-gamma 10^{S/10} / noise`, exceeds the threshold with at least the
/// calibration probability over the shadowing distribution.
pub fn calibrate_transmit_power(scenario: &Scenario, user_position: [f64; 2], noise_variance: f64) -> Result<f64> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let gamma = scenario.pathloss_exponent;
    let threshold = scenario.calibration.threshold_db;
    let noise_db = 10.0 * noise_variance.log10();
    // T_dB making base station b sit exactly at the threshold without shadowing.
    let at_threshold: Vec<f64> = (0..scenario.bs_positions.len())
        .map(|b| threshold + noise_db + 10.0 * gamma * scenario.distance(b, user_position).log10())
        .collect();
    let nearest = at_threshold.iter().cloned().fold(f64::INFINITY, f64::min);
    let farthest = at_threshold.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let sigma = scenario.shadowing_std_db;
    if sigma == 0.0 {
        return Ok(10f64.powf(nearest / 10.0));
    }
    let q = scenario.calibration.quantile;
    let mut lo = nearest - 10.0 * sigma - 10.0;
    let mut hi = farthest + 10.0 * sigma + 10.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if exceedance_probability(scenario, user_position, noise_variance, mid) >= q {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(10f64.powf(hi / 10.0))
}

/// Uniform point in a convex polygon (fan triangulation, area weighted).
fn uniform_in_polygon(poly: &[[f64; 2]], rng: &mut impl Rng) -> [f64; 2] {
    let o = poly[0];
    let areas: Vec<f64> = poly[1..]
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            0.5 * ((a[0] - o[0]) * (b[1] - o[1]) - (b[0] - o[0]) * (a[1] - o[1])).abs()
        })
        .collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut tri = areas.len() - 1;
    for (i, a) in areas.iter().enumerate() {
        if pick < *a {
            tri = i;
            break;
        }
        pick -= a;
    }
    let (a, b) = (poly[tri + 1], poly[tri + 2]);
    let r1 = rng.random::<f64>().sqrt();
    let r2 = rng.random::<f64>();
    let (wa, wb, wo) = (r1 * (1.0 - r2), r1 * r2, 1.0 - r1);
    [
        wo * o[0] + wa * a[0] + wb * b[0],
        wo * o[1] + wa * a[1] + wb * b[1],
    ]
}

/// A generated drop: the profile plus what produced it.
#[derive(Debug, Clone)]
pub struct UserDrop {
    pub profile: PowerProfile,
    pub user_positions: Vec<[f64; 2]>,
    /// Calibrated transmit power per user (linear).
    pub transmit_power: Vec<f64>,
}

/// Drops `scenario.users` users and builds their power profile against unit
/// noise. Deterministic in `seed`.
pub fn generate_drop(scenario: &Scenario, seed: u64) -> Result<UserDrop> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shadow = Normal::new(0.0, scenario.shadowing_std_db)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n_bs = scenario.bs_positions.len();
    let per_bs = scenario.antennas_per_bs;
    let mut p = RealMatrix::zeros(scenario.n_r(), scenario.users);
    let mut positions = Vec::with_capacity(scenario.users);
    let mut powers = Vec::with_capacity(scenario.users);
    for k in 0..scenario.users {
        let pos = uniform_in_polygon(&scenario.user_region, &mut rng);
        let t = calibrate_transmit_power(scenario, pos, 1.0)?;
        for b in 0..n_bs {
            let s_db: f64 = shadow.sample(&mut rng);
            let gain = t * scenario.distance(b, pos).powf(-scenario.pathloss_exponent) * 10f64.powf(s_db / 10.0);
            for a in 0..per_bs {
                p.set(b * per_bs + a, k, gain);
            }
        }
        positions.push(pos);
        powers.push(t);
    }
    Ok(UserDrop { profile: PowerProfile::new(p)?, user_positions: positions, transmit_power: powers })
}
