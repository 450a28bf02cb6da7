use std::f64::consts::E;

use super::PrivacyError;

const MAX_ITERS: usize = 50;

/// Lower branch `W₋₁` of the Lambert W function: the `w ≤ -1` solving
/// `w·eʷ = x` for `x ∈ [-1/e, 0)`.
///
/// Halley iteration, started from the branch-point series near `-1/e` and
/// from the asymptotic `ln(-x) - ln(-ln(-x))` elsewhere.
pub fn lambert_w_minus1(x: f64) -> Result<f64, PrivacyError> {
    let branch = -1.0 / E;
    if !(x >= branch && x < 0.0) {
        // Allow rounding slop right at the branch point.
        if x < branch && x > branch - 4.0 * f64::EPSILON {
            return Ok(-1.0);
        }
        return Err(PrivacyError::DomainError(x));
    }
    if x == branch {
        return Ok(-1.0);
    }
    let mut w = if x < -0.25 {
        -1.0 - (2.0 * (1.0 + E * x)).max(0.0).sqrt()
    } else {
        let l = (-x).ln();
        l - (-l).ln()
    };
    for _ in 0..MAX_ITERS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = (w - step).min(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs() {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(x: f64) -> f64 {
        let w = lambert_w_minus1(x).unwrap();
        assert!(w <= -1.0);
        (w * w.exp() - x).abs()
    }

    #[test]
    fn branch_point() {
        assert_eq!(lambert_w_minus1(-1.0 / E).unwrap(), -1.0);
    }

    #[test]
    fn minus_two() {
        let x = -2.0 * (-2.0f64).exp();
        let w = lambert_w_minus1(x).unwrap();
        assert!((w + 2.0).abs() < 1e-12, "{w}");
        assert!(residual(x) < 1e-12);
    }

    #[test]
    fn residual_across_domain() {
        for x in [-0.1, -0.3, -0.367, -0.36787944, -1e-3, -1e-12, -1e-300, -0.2] {
            assert!(residual(x) < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn outside_domain() {
        assert!(matches!(lambert_w_minus1(0.0), Err(PrivacyError::DomainError(_))));
        assert!(matches!(lambert_w_minus1(-0.5), Err(PrivacyError::DomainError(_))));
        assert!(lambert_w_minus1(f64::NAN).is_err());
    }
}
