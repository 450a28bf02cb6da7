use serde::{Deserialize, Serialize};

use crate::agents::{branch_flows, PolarVoltages};
use crate::complex::ComplexQuantity;
use crate::network::NetworkModel;

/// Agent-side copies `x`: one per load and generator, and flow and voltage
/// copies per line end (`[from, to]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusVars {
    pub load: Vec<ComplexQuantity>,
    pub generator: Vec<ComplexQuantity>,
    pub flow: Vec<[ComplexQuantity; 2]>,
    pub voltage: Vec<[ComplexQuantity; 2]>,
}

/// Bus-side responses `z`. Voltages are per bus, everything else per entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusVars {
    pub load: Vec<ComplexQuantity>,
    pub generator: Vec<ComplexQuantity>,
    pub flow: Vec<[ComplexQuantity; 2]>,
    pub voltage: Vec<ComplexQuantity>,
}

/// Multipliers of the couplings `x = z`, same layout as [`ConsensusVars`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVars {
    pub load: Vec<ComplexQuantity>,
    pub generator: Vec<ComplexQuantity>,
    pub flow: Vec<[ComplexQuantity; 2]>,
    pub voltage: Vec<[ComplexQuantity; 2]>,
}

impl DualVars {
    pub fn zeros(model: &NetworkModel) -> Self {
        let zero = ComplexQuantity::ZERO;
        Self {
            load: vec![zero; model.loads().len()],
            generator: vec![zero; model.generators().len()],
            flow: vec![[zero; 2]; model.lines().len()],
            voltage: vec![[zero; 2]; model.lines().len()],
        }
    }
}

/// Everything one ADMM iteration reads and writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    pub consensus: ConsensusVars,
    pub bus: BusVars,
    pub duals: DualVars,
    /// Last polar solution of each line agent; its next warm start.
    pub line_polar: Vec<PolarVoltages>,
    pub rho: f64,
    /// Iterations completed.
    pub iteration: usize,
}

impl AdmmState {
    /// Zero duals and bus powers, flat voltages.
    pub fn flat(model: &NetworkModel, rho: f64) -> Self {
        let zero = ComplexQuantity::ZERO;
        let one = ComplexQuantity::new(1.0, 0.0);
        let (nl, ng, ne, nb) = (model.loads().len(), model.generators().len(), model.lines().len(), model.buses().len());
        Self {
            consensus: ConsensusVars {
                load: vec![zero; nl],
                generator: vec![zero; ng],
                flow: vec![[zero; 2]; ne],
                voltage: vec![[one; 2]; ne],
            },
            bus: BusVars { load: vec![zero; nl], generator: vec![zero; ng], flow: vec![[zero; 2]; ne], voltage: vec![one; nb] },
            duals: DualVars::zeros(model),
            line_polar: vec![PolarVoltages::FLAT; ne],
            rho,
            iteration: 0,
        }
    }

    /// Consensus and bus variables both set from an operating point given
    /// by per-bus polar voltages `(|V|, ∠V)`, dispatches and loads. Flows
    /// follow from the voltages; duals are zero.
    pub fn from_operating_point(
        model: &NetworkModel,
        voltages: &[(f64, f64)],
        dispatch: &[ComplexQuantity],
        loads: &[ComplexQuantity],
        rho: f64,
    ) -> Self {
        let line_polar: Vec<PolarVoltages> = (0..model.lines().len())
            .map(|l| {
                let [i, j] = model.line_buses(l);
                PolarVoltages { magnitude: [voltages[i].0, voltages[j].0], angle: [voltages[i].1, voltages[j].1] }
            })
            .collect();
        let flow: Vec<[ComplexQuantity; 2]> =
            line_polar.iter().zip(model.lines()).map(|(p, line)| branch_flows(line.admittance, p)).collect();
        let line_voltage: Vec<[ComplexQuantity; 2]> = line_polar.iter().map(|p| p.rectangular()).collect();
        let bus_voltage = voltages.iter().map(|&(m, a)| ComplexQuantity::from_polar(m, a)).collect();
        Self {
            consensus: ConsensusVars {
                load: loads.to_vec(),
                generator: dispatch.to_vec(),
                flow: flow.clone(),
                voltage: line_voltage,
            },
            bus: BusVars { load: loads.to_vec(), generator: dispatch.to_vec(), flow, voltage: bus_voltage },
            duals: DualVars::zeros(model),
            line_polar,
            rho,
            iteration: 0,
        }
    }
}

/// Versioned JSON document of a state plus the bus responses of the
/// iteration before it, enough to recompute its residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub version: u32,
    pub state: AdmmState,
    pub previous_bus: BusVars,
}

impl StateSnapshot {
    pub const VERSION: u32 = 1;

    pub fn new(state: AdmmState, previous_bus: BusVars) -> Self {
        Self { version: Self::VERSION, state, previous_bus }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let snap: StateSnapshot = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if snap.version != Self::VERSION {
            return Err(format!("unsupported snapshot version {}", snap.version));
        }
        Ok(snap)
    }
}

/// `λ += ρ(x - z)` for every coupling.
pub fn update_duals(model: &NetworkModel, state: &mut AdmmState, rho: f64) {
    let step = |lambda: &mut ComplexQuantity, x: ComplexQuantity, z: ComplexQuantity| {
        *lambda += (x - z).scale(rho);
    };
    let (x, z, d) = (&state.consensus, &state.bus, &mut state.duals);
    for k in 0..d.load.len() {
        step(&mut d.load[k], x.load[k], z.load[k]);
    }
    for k in 0..d.generator.len() {
        step(&mut d.generator[k], x.generator[k], z.generator[k]);
    }
    for l in 0..d.flow.len() {
        let buses = model.line_buses(l);
        for e in 0..2 {
            step(&mut d.flow[l][e], x.flow[l][e], z.flow[l][e]);
            step(&mut d.voltage[l][e], x.voltage[l][e], z.voltage[buses[e]]);
        }
    }
}

/// `(ε_p, ε_d)`: largest component of `x - z`, and `ρ` times the largest
/// component of the change in `z`.
pub fn compute_residuals(model: &NetworkModel, now: &AdmmState, previous_bus: &BusVars, rho: f64) -> (f64, f64) {
    let (x, z) = (&now.consensus, &now.bus);
    let gap = |a: ComplexQuantity, b: ComplexQuantity| (a - b).max_abs();
    let mut eps_p = 0.0f64;
    for (a, b) in x.load.iter().zip(&z.load).chain(x.generator.iter().zip(&z.generator)) {
        eps_p = eps_p.max(gap(*a, *b));
    }
    for l in 0..x.flow.len() {
        let buses = model.line_buses(l);
        for e in 0..2 {
            eps_p = eps_p.max(gap(x.flow[l][e], z.flow[l][e])).max(gap(x.voltage[l][e], z.voltage[buses[e]]));
        }
    }

    let p = previous_bus;
    let mut change = 0.0f64;
    let pairs = z
        .load
        .iter()
        .zip(&p.load)
        .chain(z.generator.iter().zip(&p.generator))
        .chain(z.flow.iter().flatten().zip(p.flow.iter().flatten()))
        .chain(z.voltage.iter().zip(&p.voltage));
    for (a, b) in pairs {
        change = change.max(gap(*a, *b));
    }
    (eps_p, rho * change)
}
