//! Symbol error rates from SINR laws via the MGF approach, and the
//! high-SNR asymptotes `(G_a snr)^(-G_d)`.
//!
//! Every supported constellation reduces to angular integrals
//! `w (1/pi) int_0^T M(g / sin^2 theta) d theta`, with `M(s) = E{exp(-s Z)}`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::ExponentialMixture;
use crate::mmse::mmse_k0_terms;
use crate::profile::UserView;
use crate::quad::{integrate, Tolerance};
use crate::zf::zf_k0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModulationKind {
    Psk,
    Qam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    pub kind: ModulationKind,
    pub m: u32,
    pub g: f64,
    /// Upper angle of the PSK integral; `pi/2` for QAM.
    pub t_upper: f64,
}

impl ModulationSpec {
    pub fn psk(m: u32) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidArgument(format!("PSK order must be at least 2, got {m}")));
        }
        let mf = m as f64;
        Ok(Self { kind: ModulationKind::Psk, m, g: (PI / mf).sin().powi(2), t_upper: (mf - 1.0) * PI / mf })
    }

    pub fn qam(m: u32) -> Result<Self> {
        let side = (m as f64).sqrt().round() as u32;
        if m < 4 || side * side != m {
            return Err(Error::InvalidArgument(format!("QAM order must be a square of at least 4, got {m}")));
        }
        Ok(Self { kind: ModulationKind::Qam, m, g: 1.5 / (m as f64 - 1.0), t_upper: FRAC_PI_2 })
    }

    pub fn bpsk() -> Self {
        Self::psk(2).expect("valid order")
    }

    pub fn qpsk() -> Self {
        Self::psk(4).expect("valid order")
    }

    /// `(weight, upper angle)` pairs: SER = sum_j w_j (1/pi) int_0^T_j M(g/sin^2) dtheta.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        match self.kind {
            ModulationKind::Psk => vec![(1.0, self.t_upper)],
            ModulationKind::Qam => {
                let q = 1.0 - 1.0 / (self.m as f64).sqrt();
                vec![(4.0 * q, FRAC_PI_2), (-4.0 * q * q, FRAC_PI_4)]
            }
        }
    }
}

impl fmt::Display for ModulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.m) {
            (ModulationKind::Psk, 2) => write!(f, "bpsk"),
            (ModulationKind::Psk, 4) => write!(f, "qpsk"),
            (ModulationKind::Psk, m) => write!(f, "{m}psk"),
            (ModulationKind::Qam, m) => write!(f, "{m}qam"),
        }
    }
}

impl FromStr for ModulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::InvalidArgument(format!("unknown modulation '{s}'"));
        match lower.as_str() {
            "bpsk" => return Ok(Self::bpsk()),
            "qpsk" => return Ok(Self::qpsk()),
            _ => {}
        }
        if let Some(order) = lower.strip_suffix("psk") {
            Self::psk(order.parse().map_err(|_| bad())?)
        } else if let Some(order) = lower.strip_suffix("qam") {
            Self::qam(order.parse().map_err(|_| bad())?)
        } else {
            Err(bad())
        }
    }
}

fn angular<F: Fn(f64) -> f64>(mgf: F, modulation: &ModulationSpec, tol: Tolerance) -> Result<f64> {
    let mut total = 0.0;
    for (w, t) in modulation.segments() {
        let part = integrate(
            |theta| {
                let s2 = theta.sin().powi(2);
                if s2 == 0.0 {
                    0.0
                } else {
                    mgf(modulation.g / s2)
                }
            },
            0.0,
            t,
            tol,
        )?;
        total += w * part / PI;
    }
    Ok(total)
}

pub fn ser_from_mixture(mix: &ExponentialMixture, modulation: &ModulationSpec) -> Result<f64> {
    angular(|s| mix.mgf(s), modulation, Tolerance::STRICT)
}

/// Exact SEP at a fixed instantaneous SNR.
pub fn conditional_ser(snr: f64, modulation: &ModulationSpec, tol: Tolerance) -> Result<f64> {
    angular(|s| (-s * snr).exp(), modulation, tol)
}

/// `(1/pi) int_0^c sin^(2m) theta / (a + sin^2 theta) d theta`.
pub fn jm_integral(m: u32, c: f64, a: f64) -> Result<f64> {
    if m < 1 || !(c > 0.0 && c < PI) || !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!("J_m needs m >= 1, 0 < c < pi, a >= 0; got m={m}, c={c}, a={a}")));
    }
    let v = integrate(
        |t| {
            let s2 = t.sin().powi(2);
            if s2 == 0.0 {
                0.0
            } else {
                s2.powi(m as i32 - 1) * (s2 / (a + s2))
            }
        },
        0.0,
        c,
        Tolerance::STRICT,
    )?;
    Ok(v / PI)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighSnrAsymptote {
    pub diversity: u32,
    pub array_gain: f64,
    pub k0: f64,
    pub integral: f64,
}

impl HighSnrAsymptote {
    fn new(diversity: usize, k0: f64, integral: f64) -> Self {
        let l = diversity as f64;
        Self { diversity: diversity as u32, array_gain: (k0 * integral).powf(-1.0 / l), k0, integral }
    }

    /// `(G_a snr)^(-G_d)`, with `snr = 1 / sigma^2`.
    pub fn ser(&self, snr: f64) -> f64 {
        (self.array_gain * snr).powi(-(self.diversity as i32))
    }
}

pub fn zf_high_snr(view: &UserView, modulation: &ModulationSpec) -> Result<HighSnrAsymptote> {
    let k0 = zf_k0(view)?;
    let l = view.diversity();
    let g = modulation.g;
    let mut integral = 0.0;
    for (w, t) in modulation.segments() {
        let v = integrate(|th| (th.sin().powi(2) / g).powi(l as i32), 0.0, t, Tolerance::STRICT)?;
        integral += w * v / PI;
    }
    Ok(HighSnrAsymptote::new(l, k0, integral))
}

/// MMSE asymptote. The integral uses the `J_{L+1}` partial-fraction form when
/// the interference roots are distinct and real, and direct quadrature of
/// `(sin^2/g)^L K0(g/sin^2) / c0` otherwise.
pub fn mmse_high_snr(view: &UserView, modulation: &ModulationSpec) -> Result<HighSnrAsymptote> {
    if view.q2.cols() == 0 {
        return zf_high_snr(view, modulation);
    }
    let terms = mmse_k0_terms(view)?;
    let l = view.diversity();
    let g = modulation.g;
    let mut integral = 0.0;
    for (w, t) in modulation.segments() {
        let v = if terms.has_partial_fractions() {
            let mut acc = 0.0;
            for (theta, chi) in terms.thetas.iter().zip(&terms.chis) {
                acc += chi / theta * jm_integral(l as u32 + 1, t, g / theta)?;
            }
            acc / g.powi(l as i32)
        } else {
            integrate(
                |th| {
                    let s2 = th.sin().powi(2);
                    if s2 == 0.0 {
                        0.0
                    } else {
                        (s2 / g).powi(l as i32) * terms.k0(g / s2) / terms.c0
                    }
                },
                0.0,
                t,
                Tolerance::STRICT,
            )? / PI
        };
        integral += w * v;
    }
    Ok(HighSnrAsymptote::new(l, terms.c0, integral))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::mixture_from_denominator;
    use crate::profile::{builtin_profile, normalize_columns, user_view, BuiltinProfile, PowerProfile};
    use crate::zf::zf_mixture;

    fn bpsk_rayleigh(mean_snr: f64) -> f64 {
        0.5 * (1.0 - (mean_snr / (1.0 + mean_snr)).sqrt())
    }

    #[test]
    fn parse_modulations() {
        assert_eq!("BPSK".parse::<ModulationSpec>().unwrap(), ModulationSpec::bpsk());
        assert_eq!("qpsk".parse::<ModulationSpec>().unwrap(), ModulationSpec::psk(4).unwrap());
        assert_eq!("8psk".parse::<ModulationSpec>().unwrap().m, 8);
        let q = "16qam".parse::<ModulationSpec>().unwrap();
        assert_eq!(q.kind, ModulationKind::Qam);
        assert!((q.g - 0.1).abs() < 1e-15);
        assert!("12qam".parse::<ModulationSpec>().is_err());
        assert!("1psk".parse::<ModulationSpec>().is_err());
        assert!("fsk".parse::<ModulationSpec>().is_err());
        for name in ["bpsk", "qpsk", "8psk", "64qam"] {
            assert_eq!(name.parse::<ModulationSpec>().unwrap().to_string(), name);
        }
    }

    #[test]
    fn bpsk_single_exponential_closed_form() {
        for db in [0.0, 10.0, 20.0, 30.0] {
            let gamma = 10f64.powf(db / 10.0);
            let mix = ExponentialMixture::exponential(1.0 / gamma);
            let ser = ser_from_mixture(&mix, &ModulationSpec::bpsk()).unwrap();
            assert!((ser - bpsk_rayleigh(gamma)).abs() < 1e-10, "{db} dB");
        }
        let ser = ser_from_mixture(&ExponentialMixture::exponential(0.1), &ModulationSpec::bpsk()).unwrap();
        assert!((ser - 0.02327).abs() < 1e-5);
    }

    #[test]
    fn bpsk_erlang_matches_mrc() {
        // L-branch MRC with unit-mean branches: textbook closed form
        let gamma: f64 = 3.0;
        let mu = (gamma / (1.0 + gamma)).sqrt();
        for l in 1..=4u32 {
            let mut want = 0.0;
            for k in 0..l {
                let binom = (0..k).fold(1.0, |acc, j| acc * (l - 1 + k - j) as f64 / (j + 1) as f64);
                want += binom * ((1.0 + mu) / 2.0).powi(k as i32);
            }
            want *= ((1.0 - mu) / 2.0).powi(l as i32);
            let coeffs: Vec<f64> = (0..=l).map(|i| crate::linalg::binomial(l as usize, i as usize) as f64).collect();
            let mix = mixture_from_denominator(1.0, &coeffs, 1.0 / gamma).unwrap();
            let ser = ser_from_mixture(&mix, &ModulationSpec::bpsk()).unwrap();
            assert!((ser - want).abs() < 1e-8, "L={l}: {ser} vs {want}");
        }
    }

    #[test]
    fn conditional_bpsk_is_gaussian_tail() {
        for snr in [0.1, 1.0, 4.0] {
            let want = 0.5 * statrs::function::erf::erfc((snr as f64).sqrt());
            let got = conditional_ser(snr, &ModulationSpec::bpsk(), Tolerance::STRICT).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "{got} {want}");
        }
    }

    #[test]
    fn qpsk_and_4qam_agree_at_low_ser() {
        for rate in [0.01, 0.003] {
            let mix = ExponentialMixture::exponential(rate);
            let a = ser_from_mixture(&mix, &ModulationSpec::qpsk()).unwrap();
            let b = ser_from_mixture(&mix, &ModulationSpec::qam(4).unwrap()).unwrap();
            assert!(a <= 1e-2);
            assert!((a - b).abs() < 1e-3);
        }
    }

    #[test]
    fn ser_monotone_in_rate_scaling() {
        let v = user_view(&builtin_profile(BuiltinProfile::D4), 1).unwrap();
        let mix = zf_mixture(&v, 0.2).unwrap();
        let m = ModulationSpec::qpsk();
        let mut last = ser_from_mixture(&mix, &m).unwrap();
        for k in 1..6 {
            let s = ser_from_mixture(&mix.scaled(1.5f64.powi(k)), &m).unwrap();
            assert!(s < last);
            last = s;
        }
    }

    #[test]
    fn symmetric_profile_equal_ser() {
        let p = normalize_columns(&builtin_profile(BuiltinProfile::PointToPoint)).unwrap();
        let sers: Vec<f64> = (0..3)
            .map(|u| ser_from_mixture(&zf_mixture(&user_view(&p, u).unwrap(), 0.1).unwrap(), &ModulationSpec::qpsk()).unwrap())
            .collect();
        assert!((sers[0] - sers[1]).abs() < 1e-12 && (sers[1] - sers[2]).abs() < 1e-12);
    }

    #[test]
    fn jm_examples() {
        assert!((jm_integral(1, FRAC_PI_2, 0.0).unwrap() - 0.5).abs() < 1e-13);
        let want = 0.5 - 1.0 / (2.0 * 2f64.sqrt());
        assert!((jm_integral(1, FRAC_PI_2, 1.0).unwrap() - want).abs() < 1e-12);
        let a = 1e8;
        let limit = integrate(|t| t.sin().powi(6), 0.0, 2.0, Tolerance::STRICT).unwrap() / PI;
        assert!((a * jm_integral(3, 2.0, a).unwrap() / limit - 1.0).abs() < 1e-6);
        assert!(jm_integral(0, 1.0, 1.0).is_err());
        assert!(jm_integral(1, PI, 1.0).is_err());
        assert!(jm_integral(1, 1.0, -1.0).is_err());
    }

    #[test]
    fn bpsk_diversity_one_integral() {
        let v = user_view(&PowerProfile::from_rows(&[[0.7, 0.2], [0.4, 1.1]]).unwrap(), 0).unwrap();
        let a = zf_high_snr(&v, &ModulationSpec::bpsk()).unwrap();
        assert_eq!(a.diversity, 1);
        assert!((a.integral - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zf_asymptote_matches_single_exponential() {
        let p = PowerProfile::from_rows(&[[0.7, 0.2], [0.4, 1.1]]).unwrap();
        let v = user_view(&p, 0).unwrap();
        let m = ModulationSpec::qpsk();
        let asym = zf_high_snr(&v, &m).unwrap();
        // find the SNR giving mixture SER 1e-5
        let ser_at = |snr: f64| ser_from_mixture(&zf_mixture(&v, 1.0 / snr).unwrap(), &m).unwrap();
        let (mut lo, mut hi) = (1.0f64, 1e9f64);
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if ser_at(mid) > 1e-5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ratio = asym.ser(hi) / ser_at(hi);
        assert!((ratio - 1.0).abs() < 0.02, "ratio {ratio}");
    }

    #[test]
    fn doubling_desired_power_doubles_array_gain() {
        let p = PowerProfile::from_rows(&[[0.9, 0.2], [0.1, 2.0], [1.7, 0.6]]).unwrap();
        let doubled = p.scale_column(0, 2.0).unwrap();
        let m = ModulationSpec::qpsk();
        let a = zf_high_snr(&user_view(&p, 0).unwrap(), &m).unwrap();
        let b = zf_high_snr(&user_view(&doubled, 0).unwrap(), &m).unwrap();
        assert!((b.array_gain / a.array_gain - 2.0).abs() < 1e-12);
        assert!((b.ser(1e4) / a.ser(1e4) - 0.5f64.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn mmse_dual_user_integral_by_direct_quadrature() {
        let v = user_view(&PowerProfile::from_rows(&[[0.3, 1.2], [2.0, 0.4], [0.6, 0.9]]).unwrap(), 0).unwrap();
        let m = ModulationSpec::qpsk();
        let a = mmse_high_snr(&v, &m).unwrap();
        let terms = mmse_k0_terms(&v).unwrap();
        let l = 2;
        let direct = integrate(
            |th| {
                let s2 = th.sin().powi(2);
                (s2 / m.g).powi(l) * terms.k0(m.g / s2.max(1e-300)) / terms.c0
            },
            0.0,
            m.t_upper,
            Tolerance::STRICT,
        )
        .unwrap()
            / PI;
        assert!((a.integral - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn mmse_asymptote_below_zf() {
        let p = builtin_profile(BuiltinProfile::D4);
        for user in 0..4 {
            let v = user_view(&p, user).unwrap();
            for m in [ModulationSpec::qpsk(), ModulationSpec::qam(16).unwrap()] {
                let z = zf_high_snr(&v, &m).unwrap();
                let x = mmse_high_snr(&v, &m).unwrap();
                assert!(x.ser(1e4) <= z.ser(1e4));
            }
        }
    }

    #[test]
    fn mmse_tends_to_zf_when_leakage_vanishes() {
        // interference far above the desired signal pushes every theta up
        let p = PowerProfile::from_rows(&[[1.0, 1e6, 2e6], [1.5, 3e6, 1e6], [0.7, 2e6, 2e6], [1.2, 1e6, 3e6]]).unwrap();
        let v = user_view(&p, 0).unwrap();
        let m = ModulationSpec::qpsk();
        let z = zf_high_snr(&v, &m).unwrap();
        let x = mmse_high_snr(&v, &m).unwrap();
        assert!((x.array_gain / z.array_gain - 1.0).abs() < 0.01);
    }

    #[test]
    fn single_user_mmse_delegates() {
        let v = user_view(&PowerProfile::from_rows(&[[1.0], [2.0]]).unwrap(), 0).unwrap();
        let m = ModulationSpec::qpsk();
        assert_eq!(mmse_high_snr(&v, &m).unwrap(), zf_high_snr(&v, &m).unwrap());
    }
}
