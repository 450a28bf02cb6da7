use std::f64::consts::{E, TAU};

use rand::Rng;

use super::lambert::lambert_w_minus1;
use super::PrivacyParams;
use crate::complex::ComplexQuantity;

/// Radius with CDF `1 - (1 + r/s)e^{-r/s}` for scale `s = α/ε`, by inverting
/// the CDF at `p`.
pub fn planar_laplace_radius(p: f64, scale: f64) -> f64 {
    let w = lambert_w_minus1((p - 1.0) / E).expect("(p - 1)/e lies in [-1/e, 0) for p in [0, 1)");
    -scale * (w + 1.0)
}

/// Adds planar Laplace noise: uniform angle, Gamma(2, α/ε) radius.
pub fn polar_laplace_obfuscate<R: Rng + ?Sized>(
    load: ComplexQuantity,
    params: &PrivacyParams,
    rng: &mut R,
) -> ComplexQuantity {
    let theta = rng.random::<f64>() * TAU;
    let p = rng.random::<f64>();
    let r = planar_laplace_radius(p, params.alpha / params.epsilon);
    load + ComplexQuantity::from_polar(r, theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability_means_zero_radius() {
        assert_eq!(planar_laplace_radius(0.0, 0.1), 0.0);
    }

    #[test]
    fn unit_radius_quantile() {
        // C(1) = 1 - 2/e for unit scale
        let r = planar_laplace_radius(1.0 - 2.0 / E, 1.0);
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn radius_inverts_cdf() {
        let cdf = |r: f64| 1.0 - (1.0 + r) * (-r).exp();
        for p in [0.01, 0.2, 0.5, 0.9, 0.999] {
            let r = planar_laplace_radius(p, 1.0);
            assert!((cdf(r) - p).abs() < 1e-12);
        }
    }
}
