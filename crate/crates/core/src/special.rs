//! Gaussian tail probabilities and log-densities.
//!
//! Tails go through `erfc` rather than `1 - erf` so that probabilities far
//! below machine epsilon keep their relative accuracy.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z * FRAC_1_SQRT_2)
}

/// Lower tail `P(Z < z)` of the standard normal.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Density of `N(mu, sigma^2)` at `x`.
pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sigma)
}

/// Natural log of the density of `N(mu, sigma^2)` at `x`.
pub fn normal_ln_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

/// Probability that `N(mu, sigma^2)` falls in `(a, b)`; either end may be infinite.
///
/// The difference is always taken between two tails on the same side of the
/// mean, so small interval masses far from the mean do not cancel to zero.
pub fn gaussian_interval_mass(a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let za = (a - mu) / sigma;
    let zb = (b - mu) / sigma;
    let mass = if za >= 0.0 {
        normal_sf(za) - normal_sf(zb)
    } else if zb <= 0.0 {
        normal_cdf(zb) - normal_cdf(za)
    } else {
        1.0 - normal_cdf(za) - normal_sf(zb)
    };
    mass.max(0.0)
}
