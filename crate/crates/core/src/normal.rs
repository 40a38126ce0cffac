//! Standard normal density, distribution function, quantile and the two
//! Mills-type ratios that appear in the Bayes tests' limit statistics.

use statrs::function::erf::{erfc, erfc_inv};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Below this argument `F(x)` is evaluated through the asymptotic Mills
/// series, since `erfc` underflows near `x = -38`.
const ASYMPTOTIC_CUTOFF: f64 = -30.0;

pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - F(x)`, accurate for large positive `x`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// `z` with `P(N(0,1) > z) = epsilon`.
pub fn upper_quantile(epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon = {epsilon} is not in (0, 1)")));
    }
    if epsilon == 0.5 {
        return Ok(0.0);
    }
    Ok(SQRT_2 * erfc_inv(2.0 * epsilon))
}

/// `(1 - F(z)) / f(z)` for `z >= 30`, from the asymptotic expansion.
fn mills_tail(z: f64) -> f64 {
    let r = 1.0 / (z * z);
    (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))) / z
}

/// `f(x) / F(x)`; for `x -> -inf` this behaves like `-x`.
pub fn density_over_cdf(x: f64) -> f64 {
    if x < ASYMPTOTIC_CUTOFF {
        1.0 / mills_tail(-x)
    } else {
        pdf(x) / cdf(x)
    }
}

/// `F(x) / f(x)`; positive and strictly increasing.
pub fn cdf_over_density(x: f64) -> f64 {
    if x < ASYMPTOTIC_CUTOFF {
        mills_tail(-x)
    } else {
        cdf(x) / pdf(x)
    }
}

/// Limit law of the normalized Bayes estimator: `f(d)/F(d) + d`.
pub fn bayes_estimator_limit(d: f64) -> f64 {
    if d < ASYMPTOTIC_CUTOFF {
        // f/F + d = 1/R(z) - z with z = -d; expand to avoid cancellation.
        let z = -d;
        let r = 1.0 / (z * z);
        // 1/R(z) - z = (1/z)(1 - 2r + 10 r^2 - 74 r^3 + ...)
        (1.0 - r * (2.0 - r * (10.0 - 74.0 * r))) / z
    } else {
        density_over_cdf(d) + d
    }
}

/// Limit law of the prior-averaged likelihood ratio: `F(d)/f(d)`.
pub fn averaged_ratio_limit(d: f64) -> f64 {
    cdf_over_density(d)
}

/// Invert a strictly increasing map `g` at `y` by bisection on `[lo, hi]`.
pub(crate) fn invert_increasing<G: Fn(f64) -> f64>(g: G, y: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// CDF of `f(D)/F(D) + D`, `D ~ N(0,1)`. The map is increasing with range
/// `(0, inf)`, so the CDF is `F(g^{-1}(x))`.
pub fn bayes_estimator_limit_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    cdf(invert_increasing(bayes_estimator_limit, x, -1e3, 40.0))
}

/// CDF of `F(D)/f(D)`, `D ~ N(0,1)`.
pub fn averaged_ratio_limit_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    cdf(invert_increasing(averaged_ratio_limit, x, -1e3, 38.0))
}
