//! Generalized mixtures of exponentials, `f(z) = c * sum_i eta_i exp(-omega_i z)`
//! on `z >= 0`, and their construction from a characteristic-function
//! denominator polynomial.
//!
//! A rate of multiplicity `m` contributes Erlang-shaped terms
//! `eta z^(n-1) / (n-1)! exp(-omega z)` for `n = 1..=m`.
//!
//! Both receivers produce a CF of the form `A / sum_i phi_i (-jt)^i`. Writing
//! the denominator as `phi_L prod_i (omega_i - jt)` and expanding in partial
//! fractions gives weights `eta_i = 1 / prod_{k != i} (omega_k - omega_i)` and
//! scale `c = A / phi_L`. Weights may be negative and, in principle, rates
//! may come in complex-conjugate pairs; the density stays real either way.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Relative spread below which two rates count as the same root.
pub const ROOT_CLUSTER_TOLERANCE: f64 = 1e-6;
/// Relative coefficient perturbation applied once when roots cluster.
pub const ROOT_PERTURBATION: f64 = 1e-9;
/// `sum |c eta_i / omega_i|` above this marks a badly cancelling expansion.
const CANCELLATION_LIMIT: f64 = 1e3;
/// Largest relative coefficient residual accepted when merging near-equal
/// roots into a multiple root.
const MERGE_RESIDUAL: f64 = 1e-12;

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureTerm {
    pub weight: Complex64,
    pub rate: Complex64,
    /// Erlang order: the term is `weight z^(order-1) / (order-1)! exp(-rate z)`.
    #[serde(default = "one")]
    pub order: u32,
}

impl MixtureTerm {
    fn simple(weight: Complex64, rate: Complex64) -> Self {
        Self { weight, rate, order: 1 }
    }

    /// `weight / (rate + s)^order`.
    fn laplace(&self, s: Complex64) -> Complex64 {
        self.weight / (self.rate + s).powi(self.order as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialMixture {
    pub scale: f64,
    pub terms: Vec<MixtureTerm>,
}

impl ExponentialMixture {
    /// Single exponential with the given rate.
    pub fn exponential(rate: f64) -> Self {
        Self {
            scale: rate,
            terms: vec![MixtureTerm::simple(Complex64::new(1.0, 0.0), Complex64::new(rate, 0.0))],
        }
    }

    /// Builds the mixture whose CF is `numerator / prod_i(rate_i - jt) / leading`,
    /// with weights in residue form.
    pub fn from_rates(numerator: f64, leading: f64, rates: &[Complex64]) -> Self {
        let terms = rates
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let prod = rates
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .fold(Complex64::new(1.0, 0.0), |acc, (_, &wk)| acc * (wk - w));
                MixtureTerm::simple(prod.inv(), w)
            })
            .collect();
        Self { scale: numerator / leading, terms }
    }

    /// Mixture for `numerator / leading / prod_k (rate_k - jt)^m_k` with
    /// distinct rates and multiplicities `m_k`.
    pub fn from_multiple_rates(numerator: f64, leading: f64, rates: &[(Complex64, u32)]) -> Self {
        let mut terms = Vec::new();
        for (k, &(wk, mk)) in rates.iter().enumerate() {
            // Taylor coefficients of prod_{l != k} (s + w_l)^(-m_l) about s = -w_k.
            let mut taylor = vec![Complex64::new(0.0, 0.0); mk as usize];
            taylor[0] = Complex64::new(1.0, 0.0);
            for (l, &(wl, ml)) in rates.iter().enumerate() {
                if l == k {
                    continue;
                }
                let x = wl - wk;
                let mut factor = vec![Complex64::new(0.0, 0.0); mk as usize];
                let mut c = x.powi(-(ml as i32));
                for (r, f) in factor.iter_mut().enumerate() {
                    *f = c;
                    // C(m+r, r+1) / C(m+r-1, r) = (m+r) / (r+1)
                    c *= -(ml as f64 + r as f64) / ((r as f64 + 1.0) * x);
                }
                let prev = taylor.clone();
                for (r, t) in taylor.iter_mut().enumerate() {
                    *t = (0..=r).map(|j| prev[j] * factor[r - j]).sum();
                }
            }
            for (r, &t) in taylor.iter().enumerate() {
                terms.push(MixtureTerm { weight: t, rate: wk, order: mk - r as u32 });
            }
        }
        Self { scale: numerator / leading, terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Distinct rates in term order.
    pub fn rates(&self) -> Vec<Complex64> {
        let mut out: Vec<Complex64> = Vec::new();
        for t in &self.terms {
            if !out.contains(&t.rate) {
                out.push(t.rate);
            }
        }
        out
    }

    pub fn max_order(&self) -> u32 {
        self.terms.iter().map(|t| t.order).max().unwrap_or(0)
    }

    pub fn has_complex_rates(&self) -> bool {
        self.terms.iter().any(|t| t.rate.im != 0.0)
    }

    fn sum<F: Fn(&MixtureTerm) -> Complex64>(&self, f: F) -> Complex64 {
        self.terms.iter().map(f).sum::<Complex64>() * self.scale
    }

    /// Density with its (ideally zero) imaginary residual.
    pub fn pdf_complex(&self, z: f64) -> Complex64 {
        if z < 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.sum(|t| {
            let shape = (1..t.order).fold(1.0, |acc, j| acc * z / j as f64);
            t.weight * shape * (-t.rate * z).exp()
        })
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.pdf_complex(z).re
    }

    pub fn cdf_complex(&self, z: f64) -> Complex64 {
        if z <= 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.sum(|t| t.weight / t.rate.powi(t.order as i32) * lower_gamma_regularized(t.order, t.rate * z))
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.cdf_complex(z).re
    }

    /// `lim_{z->inf} F(z)`; equals 1 for a proper distribution.
    pub fn total_mass(&self) -> f64 {
        self.sum(|t| t.laplace(Complex64::new(0.0, 0.0))).re
    }

    pub fn mean(&self) -> f64 {
        self.sum(|t| t.weight * t.order as f64 / t.rate.powi(t.order as i32 + 1)).re
    }

    /// `E{exp(-s Z)}` evaluated as `prod_k (omega_k / (omega_k + s))^m_k`.
    ///
    /// Equal to the term sum for a proper distribution, but free of the
    /// cancellation the partial fractions suffer once `s` dwarfs the rates.
    fn transform(&self, s: Complex64) -> Complex64 {
        let mut out = Complex64::new(1.0, 0.0);
        for rate in self.rates() {
            let m = self.terms.iter().filter(|t| t.rate == rate).map(|t| t.order).max().unwrap_or(0);
            out *= (rate / (rate + s)).powi(m as i32);
        }
        out
    }

    /// `E{exp(-s Z)}` for `Re(s) > -min Re(omega)`.
    pub fn mgf(&self, s: f64) -> f64 {
        self.transform(Complex64::new(s, 0.0)).re
    }

    /// `E{exp(jtZ)}`.
    pub fn cf(&self, t: f64) -> Complex64 {
        self.transform(Complex64::new(0.0, -t))
    }

    /// [`Self::mgf`] from the term sum; agrees with it when the weights are
    /// the residues of a unit-mass transform.
    pub fn mgf_from_terms(&self, s: f64) -> f64 {
        self.sum(|t| t.laplace(Complex64::new(s, 0.0))).re
    }

    /// Law of `factor * Z`.
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        Self {
            scale: self.scale / factor,
            terms: self
                .terms
                .iter()
                .map(|t| MixtureTerm {
                    weight: t.weight / factor.powi(t.order as i32 - 1),
                    rate: t.rate / factor,
                    order: t.order,
                })
                .collect(),
        }
    }

    /// Smallest `z` with `F(z) >= p` (bisection, relative 1e-12).
    pub fn quantile(&self, p: f64) -> f64 {
        assert!((0.0..1.0).contains(&p), "quantile level must lie in [0, 1)");
        if p == 0.0 {
            return 0.0;
        }
        let mut hi = self.mean().abs().max(1e-300);
        while self.cdf(hi) < p {
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// `|a - b| / max(|a|, |b|)` for roots `a`, `b`.
fn relative_distance(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

fn min_relative_separation(roots: &[Complex64]) -> (f64, Vec<Complex64>) {
    let mut best = f64::INFINITY;
    let mut pair = Vec::new();
    for i in 0..roots.len() {
        for k in i + 1..roots.len() {
            let d = relative_distance(roots[i], roots[k]);
            if d < best {
                best = d;
                pair = vec![roots[i], roots[k]];
            }
        }
    }
    (best, pair)
}

fn check_rates<'a>(mut rates: impl Iterator<Item = &'a Complex64> + Clone) -> Result<()> {
    if let Some(bad) = rates.clone().find(|z| !(z.re > 0.0)) {
        return Err(Error::Domain(format!("denominator root {bad} has nonpositive real part")));
    }
    if rates.any(|z| z.im != 0.0) {
        log::warn!("mixture has complex-conjugate rates");
    }
    Ok(())
}

/// `sum_i |c eta_i / omega_i|`; 1 when all terms are positive.
fn cancellation(numerator: f64, leading: f64, roots: &[Complex64]) -> f64 {
    ExponentialMixture::from_rates(numerator, leading, roots)
        .terms
        .iter()
        .map(|t| (t.weight / t.rate).norm() * (numerator / leading).abs())
        .sum()
}

/// Groups roots within relative distance `radius` of each other (single linkage).
fn cluster(roots: &[Complex64], radius: f64) -> Vec<Vec<Complex64>> {
    let mut label: Vec<usize> = (0..roots.len()).collect();
    for i in 0..roots.len() {
        for k in i + 1..roots.len() {
            if relative_distance(roots[i], roots[k]) < radius {
                let (from, to) = (label[k], label[i]);
                if from != to {
                    for l in label.iter_mut() {
                        if *l == from {
                            *l = to;
                        }
                    }
                }
            }
        }
    }
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for (i, &l) in label.iter().enumerate() {
        match seen.iter().position(|&s| s == l) {
            Some(g) => groups[g].push(roots[i]),
            None => {
                seen.push(l);
                groups.push(vec![roots[i]]);
            }
        }
    }
    groups
}

/// Tries to explain the roots as a smaller set of multiple roots.
///
/// Near-equal roots are merged at growing radii; a merge is accepted when the
/// polynomial rebuilt from the cluster centroids matches `coeffs` to
/// [`MERGE_RESIDUAL`] relative to the coefficient scale.
fn merge_multiple_roots(coeffs: &[f64], roots: &[Complex64]) -> Option<Vec<(Complex64, u32)>> {
    let degree = coeffs.len() - 1;
    // roots v of sum phi_i (-v)^i, i.e. monic prod (v - r) ~ (-1)^i phi_i / phi_L
    let target: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| (if (degree - i) % 2 == 0 { c } else { -c }) / coeffs[degree])
        .collect();
    for k in (1..=6).rev() {
        let radius = 10f64.powi(-k);
        let groups = cluster(roots, radius);
        if groups.len() == roots.len() {
            continue;
        }
        let merged: Vec<(Complex64, u32)> = groups
            .iter()
            .map(|g| {
                let m = g.len() as u32;
                let mut c = g.iter().sum::<Complex64>() / m as f64;
                if c.im.abs() <= 1e-8 * c.re.abs() {
                    c.im = 0.0;
                }
                (refine_multiple_root(&target, c, m), m)
            })
            .collect();
        let mut rebuilt = vec![Complex64::new(1.0, 0.0)];
        let mut magnitude = vec![1.0];
        for &(r, m) in &merged {
            for _ in 0..m {
                rebuilt.push(Complex64::new(0.0, 0.0));
                magnitude.push(0.0);
                for i in (1..rebuilt.len()).rev() {
                    rebuilt[i] = rebuilt[i - 1] - r * rebuilt[i];
                    magnitude[i] = magnitude[i - 1] + r.norm() * magnitude[i];
                }
                rebuilt[0] = -r * rebuilt[0];
                magnitude[0] *= r.norm();
            }
        }
        // rebuilt is ascending with rebuilt[degree] = 1
        let residual = (0..=degree)
            .map(|i| (rebuilt[i] - target[i]).norm() / magnitude[i])
            .fold(0.0, f64::max);
        if residual <= MERGE_RESIDUAL {
            return Some(merged);
        }
    }
    None
}

/// Newton steps on the `(m-1)`-th derivative, where an `m`-fold root is simple.
fn refine_multiple_root(coeffs: &[f64], start: Complex64, m: u32) -> Complex64 {
    let mut d = coeffs.to_vec();
    for _ in 1..m {
        d = d.iter().enumerate().skip(1).map(|(i, c)| c * i as f64).collect();
    }
    let value = |z: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in d.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let mut z = start;
    let (mut p, _) = value(z);
    for _ in 0..8 {
        let (_, dp) = value(z);
        if dp.norm() == 0.0 {
            break;
        }
        let mut next = z - p / dp;
        if start.im == 0.0 {
            next.im = 0.0;
        }
        let (pn, _) = value(next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
        p = pn;
    }
    z
}

fn denominator_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    // roots in v of sum_i phi_i (-v)^i
    let alternating: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c } else { -c })
        .collect();
    poly::roots(&alternating)
}

/// Builds the mixture for `Z = W / noise_variance` where the CF of the
/// unit-noise variable `W` is `numerator / sum_i unit_coeffs[i] (-jt)^i`.
///
/// Roots are found for `W` and rescaled by `noise_variance`. If two roots
/// sit closer than [`ROOT_CLUSTER_TOLERANCE`] (relative), the coefficients
/// above the constant term get one alternating relative perturbation of
/// [`ROOT_PERTURBATION`] and the roots are recomputed; a cluster that
/// survives raises [`Error::DegenerateRoots`].
pub fn mixture_from_denominator(
    numerator: f64,
    unit_coeffs: &[f64],
    noise_variance: f64,
) -> Result<ExponentialMixture> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let degree = unit_coeffs
        .iter()
        .rposition(|&c| c != 0.0)
        .ok_or_else(|| Error::InvalidArgument("denominator polynomial is identically zero".into()))?;
    if degree == 0 {
        return Err(Error::InvalidArgument("denominator polynomial is constant".into()));
    }
    let mut coeffs = unit_coeffs[..=degree].to_vec();

    let leading = coeffs[degree] / noise_variance.powi(degree as i32);
    let mut unit_roots = denominator_roots(&coeffs)?;
    let (sep, _) = min_relative_separation(&unit_roots);
    if sep < ROOT_CLUSTER_TOLERANCE || cancellation(numerator, coeffs[degree], &unit_roots) > CANCELLATION_LIMIT {
        if let Some(merged) = merge_multiple_roots(&coeffs, &unit_roots) {
            check_rates(merged.iter().map(|(v, _)| v))?;
            let rates: Vec<(Complex64, u32)> = merged.iter().map(|&(v, m)| (v * noise_variance, m)).collect();
            return Ok(ExponentialMixture::from_multiple_rates(numerator, leading, &rates));
        }
    }
    if sep < ROOT_CLUSTER_TOLERANCE {
        for (i, c) in coeffs.iter_mut().enumerate().skip(1) {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            *c *= 1.0 + sign * ROOT_PERTURBATION;
        }
        unit_roots = denominator_roots(&coeffs)?;
        let (sep, cluster) = min_relative_separation(&unit_roots);
        if sep < ROOT_CLUSTER_TOLERANCE {
            return Err(Error::DegenerateRoots { cluster });
        }
    }
    check_rates(unit_roots.iter())?;
    let rates: Vec<Complex64> = unit_roots.iter().map(|v| v * noise_variance).collect();
    Ok(ExponentialMixture::from_rates(numerator, leading, &rates))
}

/// `1 - exp(-x) sum_{j<n} x^j / j!`, the regularized lower incomplete gamma
/// function of integer order.
fn lower_gamma_regularized(n: u32, x: Complex64) -> Complex64 {
    if n == 1 {
        return -exp_m1(-x);
    }
    if x.norm() < 1.0 {
        // exp(-x) sum_{j>=n} x^j / j!
        let mut term = (1..=n).fold(Complex64::new(1.0, 0.0), |acc, j| acc * x / j as f64);
        let mut sum = term;
        for j in n + 1..n + 60 {
            term *= x / j as f64;
            sum += term;
            if term.norm() <= 1e-17 * sum.norm() {
                break;
            }
        }
        return sum * (-x).exp();
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for j in 1..n {
        term *= x / j as f64;
        sum += term;
    }
    Complex64::new(1.0, 0.0) - sum * (-x).exp()
}

fn exp_m1(w: Complex64) -> Complex64 {
    let half = (0.5 * w.im).sin();
    Complex64::new(w.re.exp_m1() * w.im.cos() - 2.0 * half * half, w.re.exp() * w.im.sin())
}
