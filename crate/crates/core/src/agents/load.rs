use crate::complex::ComplexQuantity;

/// Minimizer of `‖S - S̃‖² + λ·S + (ρ/2)‖S - S_bus‖²`, per component
/// `(2·x̃ + ρ·x_bus - λ)/(2 + ρ)`.
///
/// Evaluated as an offset from `s_bus` so that a consistent fixed point
/// (`s_tilde == s_bus`, `λ = 0`) is reproduced bit-for-bit.
pub fn solve_load_agent(
    rho: f64,
    lambda: ComplexQuantity,
    s_tilde: ComplexQuantity,
    s_bus: ComplexQuantity,
) -> ComplexQuantity {
    let denom = 2.0 + rho;
    s_bus.zip_with(s_tilde.zip_with(lambda, |t, l| t - l / 2.0), |b, t| b + 2.0 * (t - b) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(rho: f64, lambda: f64, tilde: f64, bus: f64) -> f64 {
        solve_load_agent(rho, ComplexQuantity::new(lambda, 0.0), ComplexQuantity::new(tilde, 0.0), ComplexQuantity::new(bus, 0.0)).re
    }

    #[test]
    fn consistent_fixed_point() {
        assert_eq!(scalar(2.0, 0.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn vanishing_penalty_returns_noisy_value() {
        assert!((scalar(1e-12, 0.0, 0.7, -3.0) - 0.7).abs() < 1e-11);
    }

    #[test]
    fn worked_example() {
        assert!((scalar(2.0, 0.1, 0.5, 0.3) - 0.375).abs() < 1e-15);
    }
}
