//! Approximate output-SNR law of the zero-forcing receiver.
//!
//! Replacing the expectation of the ratio of Gram determinants in the exact CF
//! by the ratio of expectations gives
//! `phi(t) ~= Perm(Q2) / (|D| Perm(D^-1 Q2))`, `D = I - jt P1 / sigma^2`.
//! The denominator is a degree `L = n_r - n + 1` polynomial in `-jt`, so the
//! density is a generalized mixture of `L` exponentials.

use crate::error::{Error, Result};
use crate::linalg::{esf_all, perm_rect, perm_square, subsets, CompensatedSum};
use crate::mixture::{mixture_from_denominator, ExponentialMixture};
use crate::profile::{user_view, PowerProfile, UserView};

/// Coefficients of `|D| Perm(D^-1 Q2) = sum_i phi_i (-jt)^i`.
///
/// Stored for the unit-noise variable `sigma^2 Z` (no `sigma^-2i` factors);
/// [`DenominatorPoly::coeffs`] restores them.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorPoly {
    pub unit_coeffs: Vec<f64>,
    pub noise_variance: f64,
}

impl DenominatorPoly {
    pub fn degree(&self) -> usize {
        self.unit_coeffs.len() - 1
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.unit_coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c / self.noise_variance.powi(i as i32))
            .collect()
    }

    /// `sum_i phi_i x^i`.
    pub fn eval(&self, x: f64) -> f64 {
        crate::poly::eval(&self.coeffs(), x)
    }
}

/// Unit-noise coefficients: `sum over (n-1)-row subsets s of
/// e_i(p1 outside s) * perm(Q2[s, :])`.
pub(crate) fn zf_unit_coeffs(view: &UserView) -> Result<Vec<f64>> {
    let n_r = view.n_r();
    let interferers = view.q2.cols();
    let l = view.diversity();
    let mut acc = vec![CompensatedSum::default(); l + 1];
    for rows in subsets(n_r, interferers)? {
        let weight = perm_square(&view.q2.select_rows(rows.members()))?;
        if weight == 0.0 {
            continue;
        }
        let rest: Vec<f64> = rows.complement().members().iter().map(|&i| view.p1[i]).collect();
        for (a, e) in acc.iter_mut().zip(esf_all(&rest)) {
            a.add(e * weight);
        }
    }
    Ok(acc.iter().map(CompensatedSum::value).collect())
}

pub fn zf_denominator_coeffs(view: &UserView, noise_variance: f64) -> Result<DenominatorPoly> {
    view.require_analyzable()?;
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    Ok(DenominatorPoly { unit_coeffs: zf_unit_coeffs(view)?, noise_variance })
}

pub fn zf_mixture(view: &UserView, noise_variance: f64) -> Result<ExponentialMixture> {
    let den = zf_denominator_coeffs(view, noise_variance)?;
    let numerator = perm_rect(&view.q2)?;
    mixture_from_denominator(numerator, &den.unit_coeffs, noise_variance)
}

/// Rate `sigma^2 Perm(Q2) / perm(P)` of the single exponential obtained
/// when there are as many users as receive antennas.
pub fn zf_special_case_rate(profile: &PowerProfile, user: usize, noise_variance: f64) -> Result<f64> {
    if profile.n_r() != profile.n() {
        return Err(Error::DimensionMismatch(format!(
            "square profile required, got {}x{}",
            profile.n_r(),
            profile.n()
        )));
    }
    let view = user_view(profile, user)?;
    let theta = perm_rect(&view.q2)? / perm_square(profile.matrix())?;
    Ok(noise_variance * theta)
}

/// High-SNR constant `Perm(Q2) / (|P1| Perm(P1^-1 Q2))`.
pub fn zf_k0(view: &UserView) -> Result<f64> {
    view.require_invertible()?;
    view.require_analyzable()?;
    let num = perm_rect(&view.q2)?;
    let den = view.p1_det() * perm_rect(&view.whitened_interference())?;
    Ok(num / den)
}
