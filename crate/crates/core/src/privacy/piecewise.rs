use rand::Rng;

use super::{ComponentRange, PrivacyError, PrivacyParams};

/// Constants of the piecewise mechanism for exponent `t = ε / 2α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiecewiseConstants {
    /// Output support is `[-c, c]`.
    pub c: f64,
    /// Probability of sampling from the central interval.
    pub center_probability: f64,
}

impl PiecewiseConstants {
    pub fn new(params: &PrivacyParams) -> Self {
        let t = params.epsilon / (2.0 * params.alpha);
        // (e^t + 1)/(e^t - 1) == coth(t/2); e^t/(e^t + 1) == 1/(1 + e^-t)
        Self { c: 1.0 / (0.5 * t).tanh(), center_probability: 1.0 / (1.0 + (-t).exp()) }
    }

    pub fn left(&self, x: f64) -> f64 {
        (self.c + 1.0) / 2.0 * x - (self.c - 1.0) / 2.0
    }

    pub fn right(&self, x: f64) -> f64 {
        self.left(x) + self.c - 1.0
    }
}

/// Maps `[lower, upper]` linearly onto `[-1, 1]`.
pub fn normalize(x: f64, range: &ComponentRange) -> f64 {
    2.0 * (x - range.lower) / (range.upper - range.lower) - 1.0
}

pub fn denormalize(y: f64, range: &ComponentRange) -> f64 {
    range.lower + (y + 1.0) / 2.0 * (range.upper - range.lower)
}

/// One draw of the piecewise mechanism for a normalized scalar.
pub fn piecewise_obfuscate<R: Rng + ?Sized>(
    x: f64,
    params: &PrivacyParams,
    rng: &mut R,
) -> Result<f64, PrivacyError> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(PrivacyError::InputOutOfRange(x));
    }
    let k = PiecewiseConstants::new(params);
    let (l, r) = (k.left(x), k.right(x));
    let p = rng.random::<f64>();
    let out = if p <= k.center_probability {
        l + rng.random::<f64>() * (r - l)
    } else {
        // Uniform over [-C, L] ∪ [R, C]: pick a side by length.
        let left_len = l + k.c;
        let right_len = k.c - r;
        let u = rng.random::<f64>() * (left_len + right_len);
        if u < left_len {
            -k.c + u
        } else {
            r + (u - left_len)
        }
    };
    Ok(out.clamp(-k.c, k.c))
}
