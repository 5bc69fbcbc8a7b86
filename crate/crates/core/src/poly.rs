//! Roots of real polynomials via companion-matrix eigenvalues.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Evaluates `sum_i coeffs[i] * x^i` (ascending order) by Horner's rule.
pub fn eval<T>(coeffs: &[f64], x: T) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Add<f64, Output = T> + From<f64>,
{
    coeffs.iter().rev().fold(T::from(0.0), |acc, &c| acc * x + c)
}

fn eval_with_derivative(coeffs: &[f64], x: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// All complex roots of the polynomial with ascending coefficients `coeffs`.
/// The leading coefficient must be nonzero.
///
/// The variable is rescaled so the roots have unit geometric mean before the
/// companion matrix is formed, and every eigenvalue gets a few Newton steps
/// on the original polynomial. Non-real roots are returned as exact
/// conjugate pairs.
pub fn roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let degree = coeffs.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("empty polynomial".into()))?;
    let lead = coeffs[degree];
    if lead == 0.0 || !lead.is_finite() {
        return Err(Error::InvalidArgument("leading coefficient must be finite and nonzero".into()));
    }
    if degree == 0 {
        return Ok(Vec::new());
    }
    if coeffs[0] == 0.0 {
        return Err(Error::InvalidArgument("polynomial has a root at zero".into()));
    }

    let rho = (coeffs[0] / lead).abs().powf(1.0 / degree as f64);
    let scaled: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| c * rho.powi(i as i32) / (lead * rho.powi(degree as i32)))
        .collect();

    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..degree {
        companion[(i, degree - 1)] = -scaled[i];
    }
    let eig = companion.complex_eigenvalues();

    let mut out = Vec::with_capacity(degree);
    let mut pending_upper: Vec<Complex64> = Vec::new();
    for z in eig.iter() {
        if z.im.abs() <= 1e-8 * z.re.abs() {
            out.push(Complex64::new(polish(&scaled, Complex64::new(z.re, 0.0)).re, 0.0));
        } else if z.im > 0.0 {
            pending_upper.push(polish(&scaled, *z));
        }
    }
    for z in pending_upper {
        out.push(z);
        out.push(z.conj());
    }
    if out.len() != degree {
        // Unpaired complex eigenvalue; fall back to the raw spectrum.
        out = eig.iter().map(|z| polish(&scaled, *z)).collect();
    }
    Ok(out.into_iter().map(|z| z * rho).collect())
}

fn polish(coeffs: &[f64], mut z: Complex64) -> Complex64 {
    let (mut p, _) = eval_with_derivative(coeffs, z);
    for _ in 0..4 {
        let (_, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let candidate = z - p / dp;
        let (pc, _) = eval_with_derivative(coeffs, candidate);
        if !(pc.norm() < p.norm()) {
            break;
        }
        z = candidate;
        p = pc;
    }
    z
}
