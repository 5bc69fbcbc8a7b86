//! Approximate SINR/SNR laws, high-SNR SER constants and Monte Carlo ground
//! truth for linear MMSE and zero-forcing receivers in Rayleigh-fading
//! macrodiversity MIMO systems.

pub mod error;
pub mod linalg;
pub mod mc;
pub mod mixture;
pub mod mmse;
pub mod poly;
pub mod profile;
pub mod quad;
pub mod ser;
pub mod zf;

pub use error::{Error, Result};
pub use linalg::{esf, perm_rect, perm_square, RealMatrix};
pub use mc::{empirical_cdf, mmse_sinr, sample_channel, semi_analytic_ser, zf_snr, EmpiricalDistribution, Receiver};
pub use mixture::{ExponentialMixture, MixtureTerm};
pub use mmse::{mmse_denominator_coeffs, mmse_k0_terms, mmse_mixture, mmse_numerator, HighSnrK0, MmseDenominator};
pub use profile::{
    builtin_profile, generate_drop, normalize_columns, user_view, BuiltinProfile, PowerProfile, Scenario, UserDrop,
    UserView,
};
pub use ser::{mmse_high_snr, ser_from_mixture, zf_high_snr, HighSnrAsymptote, ModulationSpec};
pub use zf::{zf_denominator_coeffs, zf_k0, zf_mixture, zf_special_case_rate, DenominatorPoly};

/// Approximate law of the receiver output SINR (SNR for zero forcing).
pub fn approx_mixture(view: &UserView, receiver: Receiver, noise_variance: f64) -> Result<ExponentialMixture> {
    match receiver {
        Receiver::Mmse => mmse_mixture(view, noise_variance),
        Receiver::Zf => zf_mixture(view, noise_variance),
    }
}

pub fn high_snr(view: &UserView, receiver: Receiver, modulation: &ModulationSpec) -> Result<HighSnrAsymptote> {
    match receiver {
        Receiver::Mmse => mmse_high_snr(view, modulation),
        Receiver::Zf => zf_high_snr(view, modulation),
    }
}
