//! One-dimensional Gaussian primitives: interval probabilities and the
//! density of log|X| for standard normal X.

use statrs::function::erf::{erf, erfc};

use crate::error::{Error, Result};

/// 2/sqrt(2*pi), the density of |X| at zero for X ~ N(0,1).
pub const TWO_OVER_SQRT_2PI: f64 = 0.7978845608028654;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// P(|X| <= x) = 2*Phi(x) - 1 for X ~ N(0,1), x >= 0.
pub fn abs_normal_cdf(x: f64) -> f64 {
    erf(x * FRAC_1_SQRT_2)
}

/// CDF of log|X|: P(log|X| <= t) = 2*Phi(e^t) - 1.
pub fn log_abs_gaussian_cdf(t: f64) -> f64 {
    abs_normal_cdf(t.exp())
}

/// Density of log|X|: (2/sqrt(2*pi)) * exp(-e^{2u}/2 + u).
///
/// Underflows to 0 for large |u|.
pub fn log_abs_gaussian_density(u: f64) -> f64 {
    TWO_OVER_SQRT_2PI * (-0.5 * (2.0 * u).exp() + u).exp()
}

/// P(|Y + shift| <= eps) for Y centered Gaussian with standard deviation
/// `sigma`. For sigma = 0 this is the indicator of |shift| <= eps.
///
/// This is the quantity the one-dimensional Anderson inequality bounds:
/// it is maximal at shift = 0.
pub fn gaussian_interval_prob(sigma: f64, shift: f64, eps: f64) -> Result<f64> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "sigma must be a finite nonnegative number, got {sigma}"
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be a finite nonnegative number, got {eps}"
        )));
    }
    if sigma == 0.0 {
        return Ok(if shift.abs() <= eps { 1.0 } else { 0.0 });
    }
    let a = (-eps - shift) / sigma;
    let b = (eps - shift) / sigma;
    // Phi(b) - Phi(a), arranged to avoid cancellation in the tails
    let p = if a >= 0.0 {
        0.5 * (erfc(a * FRAC_1_SQRT_2) - erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * FRAC_1_SQRT_2) - erfc(-a * FRAC_1_SQRT_2))
    } else {
        0.5 * (erf(b * FRAC_1_SQRT_2) - erf(a * FRAC_1_SQRT_2))
    };
    Ok(p.clamp(0.0, 1.0))
}
