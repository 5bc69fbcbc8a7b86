//! Approximate output-SINR law of the MMSE receiver and its high-SNR
//! constant `K0(s)`.
//!
//! The CF is approximated by `Theta / (|D| E{|sigma^2 I + H2^H D^-1 H2|})`,
//! a ratio whose denominator has degree `n_r` in `-jt`. Every coefficient is a
//! finite sum of permanents of sub-blocks of `Q2` weighted by elementary
//! symmetric functions of `p1`.

use crate::error::{Error, Result};
use crate::linalg::{esf_all, perm_rect, subsets, CompensatedSum};
use crate::mixture::{mixture_from_denominator, ExponentialMixture, ROOT_CLUSTER_TOLERANCE};
use crate::poly;
use crate::profile::UserView;
use crate::zf::zf_k0;

/// Denominator `|D| E{|sigma^2 I + H2^H D^-1 H2|}` as a polynomial in `-jt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseDenominator {
    /// `table[i][k]`: sum over `k`-row subsets `s` of
    /// `e_i(p1 outside s) * Perm(Q2[s, :])`, for `i in 0..=n_r`, `k in 0..n`.
    pub table: Vec<Vec<f64>>,
    pub noise_variance: f64,
}

impl MmseDenominator {
    fn users(&self) -> usize {
        self.table[0].len()
    }

    /// Coefficients for the unit-noise variable `sigma^2 Z`:
    /// `psi_i = sum_k table[i][k] sigma^(2(n-k-1))`. Only nonnegative powers
    /// of the noise variance occur, so `sigma^2 = 0` is allowed.
    pub fn unit_coeffs(&self) -> Vec<f64> {
        let n = self.users();
        self.table
            .iter()
            .map(|row| {
                let mut acc = CompensatedSum::default();
                for (k, v) in row.iter().enumerate() {
                    acc.add(v * self.noise_variance.powi((n - k - 1) as i32));
                }
                acc.value()
            })
            .collect()
    }

    /// `phi_i = psi_i / sigma^(2i)`.
    pub fn coeffs(&self) -> Vec<f64> {
        self.unit_coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c / self.noise_variance.powi(i as i32))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        poly::eval(&self.coeffs(), x)
    }
}

fn check_noise(noise_variance: f64) -> Result<()> {
    if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
        return Err(Error::InvalidArgument("noise variance must be finite and nonnegative".into()));
    }
    Ok(())
}

/// `E{|sigma^2 I + H2^H H2|} = sum_k sigma^(2(n-k-1)) sum_{|c|=k} Perm(Q2[:, c])`.
pub fn mmse_numerator(view: &UserView, noise_variance: f64) -> Result<f64> {
    check_noise(noise_variance)?;
    let interferers = view.q2.cols();
    let mut acc = CompensatedSum::default();
    for k in 0..=interferers {
        let mut s = CompensatedSum::default();
        for cols in subsets(interferers, k)? {
            s.add(perm_rect(&view.q2.select_cols(cols.members()))?);
        }
        acc.add(s.value() * noise_variance.powi((interferers - k) as i32));
    }
    Ok(acc.value())
}

pub fn mmse_denominator_coeffs(view: &UserView, noise_variance: f64) -> Result<MmseDenominator> {
    check_noise(noise_variance)?;
    view.require_analyzable()?;
    let n_r = view.n_r();
    let interferers = view.q2.cols();
    let mut table = vec![vec![0.0; interferers + 1]; n_r + 1];
    for k in 0..=interferers {
        let mut acc = vec![CompensatedSum::default(); n_r + 1];
        for rows in subsets(n_r, k)? {
            let weight = perm_rect(&view.q2.select_rows(rows.members()))?;
            if weight == 0.0 {
                continue;
            }
            let rest: Vec<f64> = rows.complement().members().iter().map(|&i| view.p1[i]).collect();
            for (a, e) in acc.iter_mut().zip(esf_all(&rest)) {
                a.add(e * weight);
            }
        }
        for (i, a) in acc.iter().enumerate() {
            table[i][k] = a.value();
        }
    }
    Ok(MmseDenominator { table, noise_variance })
}

pub fn mmse_mixture(view: &UserView, noise_variance: f64) -> Result<ExponentialMixture> {
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let den = mmse_denominator_coeffs(view, noise_variance)?;
    let numerator = mmse_numerator(view, noise_variance)?;
    mixture_from_denominator(numerator, &den.unit_coeffs(), noise_variance)
}

/// High-SNR expansion `K0(s) = c0 sum_i chi_i / (theta_i + s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HighSnrK0 {
    pub c0: f64,
    /// `zeta_i = sum_{|c|=i} Perm((P1^-1 Q2)[:, c])`, `zeta_0 = 1`.
    pub zetas: Vec<f64>,
    /// Negated roots of `sum_i zeta_i s^(n-1-i)`. Empty when the roots are
    /// repeated or non-real, or when there are no interferers.
    pub thetas: Vec<f64>,
    pub chis: Vec<f64>,
}

impl HighSnrK0 {
    /// `c0 zeta_{n-1} / sum_i zeta_i s^(n-1-i)`, evaluated without the roots.
    pub fn k0(&self, s: f64) -> f64 {
        let asc: Vec<f64> = self.zetas.iter().rev().copied().collect();
        self.c0 * self.zetas[self.zetas.len() - 1] / poly::eval(&asc, s)
    }

    /// Same quantity from the partial-fraction form.
    pub fn k0_partial_fractions(&self, s: f64) -> f64 {
        if self.zetas.len() == 1 {
            return self.c0;
        }
        self.c0 * self.thetas.iter().zip(&self.chis).map(|(t, c)| c / (t + s)).sum::<f64>()
    }

    pub fn has_partial_fractions(&self) -> bool {
        self.thetas.len() + 1 == self.zetas.len()
    }
}

fn zeta_roots(zetas: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    if zetas.len() == 1 {
        return Ok(Some((Vec::new(), Vec::new())));
    }
    let asc: Vec<f64> = zetas.iter().rev().copied().collect();
    let roots = poly::roots(&asc)?;
    if roots.iter().any(|z| z.im != 0.0) {
        return Ok(None);
    }
    let thetas: Vec<f64> = roots.iter().map(|z| -z.re).collect();
    if let Some(bad) = thetas.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::Domain(format!("interference root {bad} is not positive")));
    }
    let max = thetas.iter().fold(0.0, |a: f64, t| a.max(*t));
    for i in 0..thetas.len() {
        for k in i + 1..thetas.len() {
            if (thetas[i] - thetas[k]).abs() < ROOT_CLUSTER_TOLERANCE * max {
                return Ok(None);
            }
        }
    }
    let last = zetas[zetas.len() - 1];
    let chis = thetas
        .iter()
        .enumerate()
        .map(|(i, ti)| {
            let prod: f64 = thetas.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, tk)| tk - ti).product();
            last / prod
        })
        .collect();
    Ok(Some((thetas, chis)))
}

pub fn mmse_k0_terms(view: &UserView) -> Result<HighSnrK0> {
    let c0 = zf_k0(view)?;
    let w = view.whitened_interference();
    let interferers = w.cols();
    let mut zetas = Vec::with_capacity(interferers + 1);
    for i in 0..=interferers {
        let mut s = CompensatedSum::default();
        for cols in subsets(interferers, i)? {
            s.add(perm_rect(&w.select_cols(cols.members()))?);
        }
        zetas.push(s.value());
    }
    let (thetas, chis) = match zeta_roots(&zetas)? {
        Some(tc) => tc,
        None => {
            log::debug!("interference roots repeated or non-real; K0 kept in polynomial form");
            (Vec::new(), Vec::new())
        }
    };
    Ok(HighSnrK0 { c0, zetas, thetas, chis })
}
