//! Post-hoc checks of an operating point against the AC power-flow model and
//! the metrics reported per run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::complex::ComplexQuantity;
use crate::network::NetworkModel;

/// Slack allowed on every bound check.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("{what}: expected {expected} entries, got {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("total reference cost is zero")]
    ZeroReferenceCost,
    #[error("generator {0} has no reference cost")]
    MissingReferenceCost(usize),
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), ValidationError> {
    if expected == found {
        Ok(())
    } else {
        Err(ValidationError::DimensionMismatch { what, expected, found })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub constraint: String,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub max_kcl_residual: f64,
    pub max_ohm_residual: f64,
    pub bound_violations: Vec<BoundViolation>,
    /// Line with the largest Ohm residual.
    pub worst_line: Option<usize>,
}

/// Kirchhoff, Ohm and bound residuals of a full operating point. `flows` holds
/// `[S_ij, S_ji]` per line.
pub fn power_flow_residuals(
    model: &NetworkModel,
    bus_voltages: &[ComplexQuantity],
    dispatches: &[ComplexQuantity],
    loads: &[ComplexQuantity],
    flows: &[[ComplexQuantity; 2]],
) -> Result<FeasibilityReport, ValidationError> {
    check_len("bus voltages", model.buses().len(), bus_voltages.len())?;
    check_len("dispatches", model.generators().len(), dispatches.len())?;
    check_len("loads", model.loads().len(), loads.len())?;
    check_len("flows", model.lines().len(), flows.len())?;

    let mut violations = Vec::new();
    let mut flag = |constraint: String, amount: f64| {
        if amount > BOUND_SLACK {
            violations.push(BoundViolation { constraint, amount });
        }
    };

    let mut max_kcl = 0.0f64;
    for b in 0..model.buses().len() {
        let mut balance = ComplexQuantity::ZERO;
        for &g in model.generators_at(b) {
            balance += dispatches[g];
        }
        for &d in model.loads_at(b) {
            balance = balance - loads[d];
        }
        for end in model.incident_lines(b) {
            balance = balance - flows[end.line][end.end.index()];
        }
        max_kcl = max_kcl.max(balance.abs());

        let bus = &model.buses()[b];
        let vm = bus_voltages[b].abs();
        flag(format!("bus {} vmin", bus.id), bus.voltage_min - vm);
        flag(format!("bus {} vmax", bus.id), vm - bus.voltage_max);
        if bus.is_slack {
            flag(format!("bus {} slack angle", bus.id), bus_voltages[b].arg().abs());
        }
    }

    for (k, (gen, s)) in model.generators().iter().zip(dispatches).enumerate() {
        flag(format!("gen {k} pmin"), gen.s_min.re - s.re);
        flag(format!("gen {k} pmax"), s.re - gen.s_max.re);
        flag(format!("gen {k} qmin"), gen.s_min.im - s.im);
        flag(format!("gen {k} qmax"), s.im - gen.s_max.im);
    }

    let mut max_ohm = 0.0f64;
    let mut worst_line = None;
    for (l, line) in model.lines().iter().enumerate() {
        let [i, j] = model.line_buses(l);
        let (vi, vj) = (bus_voltages[i], bus_voltages[j]);
        let y_conj = line.admittance.conj();
        let expected = [
            y_conj * (ComplexQuantity::new(vi.norm_sqr(), 0.0) - vi * vj.conj()),
            y_conj * (ComplexQuantity::new(vj.norm_sqr(), 0.0) - vj * vi.conj()),
        ];
        for e in 0..2 {
            let r = (flows[l][e] - expected[e]).abs();
            if worst_line.is_none() || r > max_ohm {
                max_ohm = max_ohm.max(r);
                worst_line = Some(l);
            }
            flag(format!("line {l} end {e} thermal"), flows[l][e].abs() - line.thermal_limit);
        }
        let delta = (vi * vj.conj()).arg();
        flag(format!("line {l} angle"), delta.abs() - line.angle_limit);
    }

    Ok(FeasibilityReport { max_kcl_residual: max_kcl, max_ohm_residual: max_ohm, bound_violations: violations, worst_line })
}

/// Total dispatch cost, summed in ascending generator order.
pub fn dispatch_cost(model: &NetworkModel, dispatches: &[ComplexQuantity]) -> f64 {
    model.generators().iter().zip(dispatches).fold(0.0, |acc, (g, s)| acc + g.cost(s.re))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub total_cost: f64,
    pub reference_total: f64,
    pub relative_gap: f64,
    pub per_generator_in_band: Vec<bool>,
    /// Signed difference to the reference total, percent.
    pub percent_diff: f64,
}

pub fn fidelity_report(
    model: &NetworkModel,
    dispatches: &[ComplexQuantity],
    beta: f64,
) -> Result<FidelityReport, ValidationError> {
    check_len("dispatches", model.generators().len(), dispatches.len())?;
    let mut reference_total = 0.0;
    let mut in_band = Vec::with_capacity(dispatches.len());
    for (k, (g, s)) in model.generators().iter().zip(dispatches).enumerate() {
        let reference = g.reference_cost.ok_or(ValidationError::MissingReferenceCost(k))?;
        reference_total += reference;
        let cost = g.cost(s.re);
        let (a, b) = (reference * (1.0 - beta), reference * (1.0 + beta));
        in_band.push(a.min(b) <= cost && cost <= a.max(b));
    }
    if reference_total == 0.0 {
        return Err(ValidationError::ZeroReferenceCost);
    }
    let total_cost = dispatch_cost(model, dispatches);
    let diff = total_cost - reference_total;
    Ok(FidelityReport {
        total_cost,
        reference_total,
        relative_gap: diff.abs() / reference_total.abs(),
        per_generator_in_band: in_band,
        percent_diff: 100.0 * diff / reference_total,
    })
}

/// `‖Ŝ - S̃‖²` over all real and imaginary parts, ascending load order.
pub fn privacy_loss(hat: &[ComplexQuantity], tilde: &[ComplexQuantity]) -> Result<f64, ValidationError> {
    check_len("loads", hat.len(), tilde.len())?;
    Ok(hat.iter().zip(tilde).fold(0.0, |acc, (a, b)| acc + (*a - *b).norm_sqr()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;
    use crate::network::parse_case;

    fn c(re: f64, im: f64) -> ComplexQuantity {
        ComplexQuantity::new(re, im)
    }

    #[test]
    fn privacy_loss_is_squared_distance() {
        assert_eq!(privacy_loss(&[c(0.3, 0.4)], &[c(0.0, 0.0)]).unwrap(), 0.25);
        assert_eq!(privacy_loss(&[c(1.0, 2.0)], &[c(1.0, 2.0)]).unwrap(), 0.0);
        assert!(matches!(privacy_loss(&[], &[c(0.0, 0.0)]), Err(ValidationError::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_dispatch_costs_constant_terms() {
        let model = parse_case(cases::CASE3).unwrap();
        let zero = vec![ComplexQuantity::ZERO; model.generators().len()];
        let c0: f64 = model.generators().iter().map(|g| g.cost_c0).sum();
        assert_eq!(dispatch_cost(&model, &zero), c0);
    }

    #[test]
    fn reference_dispatch_has_zero_gap() {
        let model = parse_case(cases::CASE3).unwrap();
        let dispatch = crate::network::parse_reference_dispatch(cases::CASE3_REF).unwrap();
        let model = model.load_reference_costs(&dispatch).unwrap();
        let report = fidelity_report(&model, &dispatch, 0.1).unwrap();
        assert_eq!(report.relative_gap, 0.0);
        assert!(report.per_generator_in_band.iter().all(|&b| b));
        assert!(fidelity_report(&model, &dispatch[..1], 0.1).is_err());
    }

    #[test]
    fn missing_reference_is_reported() {
        let model = parse_case(cases::CASE3).unwrap();
        let dispatch = vec![ComplexQuantity::ZERO; model.generators().len()];
        assert_eq!(fidelity_report(&model, &dispatch, 0.1), Err(ValidationError::MissingReferenceCost(0)));
    }
}
