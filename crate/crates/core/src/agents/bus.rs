use crate::complex::ComplexQuantity;

/// Role of a power variable in the bus flow balance
/// `S^g - S^d - Σ S_ij = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttachmentKind {
    Generator,
    Load,
    Flow,
}

impl AttachmentKind {
    fn sign(self) -> f64 {
        match self {
            AttachmentKind::Generator => 1.0,
            AttachmentKind::Load | AttachmentKind::Flow => -1.0,
        }
    }
}

/// One power variable of the bus problem: the bus minimizes
/// `multiplier·z + (ρ/2)‖z - target‖²`. The coordinator passes the negated
/// coupling multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attachment {
    pub kind: AttachmentKind,
    pub multiplier: ComplexQuantity,
    pub target: ComplexQuantity,
}

/// A line agent's copy of this bus voltage, with its (negated) multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageCopy {
    pub multiplier: ComplexQuantity,
    pub target: ComplexQuantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusSolution {
    /// Same order as the attachments passed in.
    pub values: Vec<ComplexQuantity>,
    pub voltage: ComplexQuantity,
}

/// `Σ sign·x` in the given order (generators +, loads and flows -).
pub fn flow_balance_residual(kinds: impl IntoIterator<Item = (AttachmentKind, ComplexQuantity)>) -> ComplexQuantity {
    kinds.into_iter().fold(ComplexQuantity::ZERO, |acc, (kind, x)| acc + x.scale(kind.sign()))
}

/// Closed-form bus step: an equality-constrained projection for the power
/// variables and an unconstrained average for the voltage.
pub fn solve_bus_agent(rho: f64, attachments: &[Attachment], voltages: &[VoltageCopy]) -> BusSolution {
    // Shifted targets u_k = t_k - m_k/ρ, then project onto Σ a_k z_k = 0.
    let shifted: Vec<ComplexQuantity> = attachments
        .iter()
        .map(|a| a.target - a.multiplier.scale(1.0 / rho))
        .collect();
    let values = if attachments.is_empty() {
        Vec::new()
    } else {
        let residual = flow_balance_residual(attachments.iter().map(|a| a.kind).zip(shifted.iter().copied()));
        let share = residual.scale(1.0 / attachments.len() as f64);
        attachments
            .iter()
            .zip(&shifted)
            .map(|(a, &u)| u - share.scale(a.kind.sign()))
            .collect()
    };

    let voltage = match voltages.split_first() {
        None => ComplexQuantity::ZERO,
        Some((first, _)) => {
            let deg = voltages.len() as f64;
            let mut spread = ComplexQuantity::ZERO;
            let mut pull = ComplexQuantity::ZERO;
            for v in voltages {
                spread += v.target - first.target;
                pull += v.multiplier;
            }
            first.target + spread.scale(1.0 / deg) - pull.scale(1.0 / (rho * deg))
        }
    };
    BusSolution { values, voltage }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn att(kind: AttachmentKind, target: f64) -> Attachment {
        Attachment { kind, multiplier: ComplexQuantity::ZERO, target: ComplexQuantity::new(target, 0.0) }
    }

    #[test]
    fn balanced_targets_are_returned() {
        let atts = [att(AttachmentKind::Generator, 1.0), att(AttachmentKind::Load, 0.25), att(AttachmentKind::Flow, 0.75)];
        let sol = solve_bus_agent(3.0, &atts, &[]);
        assert_eq!(sol.values, atts.iter().map(|a| a.target).collect::<Vec<_>>());
    }

    #[test]
    fn lone_flow_is_forced_to_zero() {
        let sol = solve_bus_agent(1.0, &[att(AttachmentKind::Flow, 0.8)], &[]);
        assert_eq!(sol.values[0], ComplexQuantity::ZERO);
    }

    #[test]
    fn residual_is_shared_equally() {
        let atts = [att(AttachmentKind::Generator, 1.0), att(AttachmentKind::Load, 0.4), att(AttachmentKind::Flow, 0.7)];
        let sol = solve_bus_agent(1.0, &atts, &[]);
        let expected = [1.0 + 0.1 / 3.0, 0.4 - 0.1 / 3.0, 0.7 - 0.1 / 3.0];
        for (v, e) in sol.values.iter().zip(expected) {
            assert!((v.re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn voltage_is_penalized_average() {
        let copies = [
            VoltageCopy { multiplier: ComplexQuantity::new(-1.0, 0.0), target: ComplexQuantity::new(1.0, 0.1) },
            VoltageCopy { multiplier: ComplexQuantity::new(0.5, 0.0), target: ComplexQuantity::new(0.9, -0.1) },
        ];
        let sol = solve_bus_agent(10.0, &[], &copies);
        // (ρ·Σt - Σm) / (ρ·deg)
        assert!((sol.voltage.re - (10.0 * 1.9 + 0.5) / 20.0).abs() < 1e-15);
        assert!(sol.voltage.im.abs() < 1e-15);
    }
}
