//! Component-based ADMM coordinator.
//!
//! Each iteration runs four barriers in order: load, generator and line agents
//! solve against the bus responses; bus agents solve against the fresh agent
//! copies; multipliers take a dual ascent step; the penalty is adapted. Within
//! a barrier the solves are independent and may run on the rayon pool
//! (feature `parallel`); results are collected in entity order, so traces do
//! not depend on the thread count.
//!
//! The coordinator receives loads only as [`ObfuscatedLoads`]. It never reads
//! `Load::demand` from the model.

mod state;
mod trace;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use state::{compute_residuals, update_duals, AdmmState, BusVars, ConsensusVars, DualVars, StateSnapshot};
pub use trace::{ConvergenceTrace, TraceRecord};

use crate::agents::{
    solve_bus_agent, solve_generator_agent, solve_line_agent, solve_load_agent, AgentError, Attachment,
    AttachmentKind, LineEndInput, LineProblem, LineSolution, LineSolverConfig, PolarVoltages, VoltageCopy,
};
use crate::complex::ComplexQuantity;
use crate::network::NetworkModel;
use crate::privacy::ObfuscatedLoads;
use crate::validation::dispatch_cost;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdmmError {
    #[error("invalid ADMM configuration: {0}")]
    InvalidConfig(String),
    #[error("generators lack reference costs")]
    MissingReferenceCosts,
    #[error("expected {expected} obfuscated loads, got {found}")]
    LoadCountMismatch { expected: usize, found: usize },
    #[error("generator {index} at iteration {iteration}: {source}")]
    Generator { index: usize, iteration: usize, source: AgentError },
    #[error("line {index} at iteration {iteration} (also from a flat start): {source}")]
    Line { index: usize, iteration: usize, source: AgentError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho_init: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Relative penalty step `c`.
    pub scale_c: f64,
    /// Residual ratio `c_t` that triggers a penalty change.
    pub threshold_ct: f64,
    pub t_max: usize,
    /// Boosting starts at iteration `⌈boost_fraction · t_max⌉`.
    pub boost_fraction: f64,
    /// Target `ε_t` for both residuals.
    pub primal_target: f64,
    /// Width of each generator's cost band around its reference cost.
    pub beta: f64,
    pub adjust_every: usize,
    /// Stop once both residuals are at most `primal_target`.
    pub early_stop: bool,
    /// Once boosting has fired, never lower the penalty again.
    pub hold_after_boost: bool,
    pub line: LineSolverConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho_init: 100.0,
            rho_min: 5.0,
            rho_max: 1e6,
            scale_c: 0.02,
            threshold_ct: 7.0,
            t_max: 5000,
            boost_fraction: 0.9,
            primal_target: 1e-3,
            beta: 0.1,
            adjust_every: 1,
            early_stop: true,
            hold_after_boost: true,
            line: LineSolverConfig::default(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<(), AdmmError> {
        let fail = |msg: &str| Err(AdmmError::InvalidConfig(msg.to_string()));
        if !(self.rho_min > 0.0 && self.rho_min <= self.rho_init && self.rho_init <= self.rho_max) {
            return fail("need 0 < rho_min <= rho_init <= rho_max");
        }
        if !(self.boost_fraction > 0.0 && self.boost_fraction < 1.0) {
            return fail("boost_fraction must lie in (0, 1)");
        }
        if self.t_max < 1 || self.adjust_every < 1 {
            return fail("t_max and adjust_every must be at least 1");
        }
        if !(self.beta >= 0.0 && self.scale_c > 0.0 && self.threshold_ct > 0.0 && self.primal_target > 0.0) {
            return fail("beta must be non-negative; scale_c, threshold_ct, primal_target positive");
        }
        Ok(())
    }

    /// First iteration (1-based) at which boosting may fire.
    pub fn boost_start(&self) -> usize {
        (self.boost_fraction * self.t_max as f64).ceil() as usize
    }

    /// Last iteration before boosting may fire.
    pub fn pre_boost_iteration(&self) -> usize {
        self.boost_start().saturating_sub(1)
    }
}

/// Penalty for the next iteration. Boosting overrides the residual-balancing
/// rule; the heuristic part only acts every `adjust_every` iterations.
pub fn update_rho(rho: f64, eps_p: f64, eps_d: f64, iter: usize, cfg: &AdmmConfig) -> f64 {
    let up = (rho * (1.0 + cfg.scale_c)).min(cfg.rho_max);
    if iter >= cfg.boost_start() && eps_p > cfg.primal_target {
        return up;
    }
    if !iter.is_multiple_of(cfg.adjust_every) {
        return rho;
    }
    if eps_p > cfg.threshold_ct * eps_d {
        up
    } else if eps_d > cfg.threshold_ct * eps_p {
        (rho / (1.0 + cfg.scale_c)).max(cfg.rho_min)
    } else {
        rho
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmResult {
    /// Post-processed loads `Ŝ^d`: the load agents' final copies.
    pub hat_loads: Vec<ComplexQuantity>,
    pub state: AdmmState,
    pub trace: ConvergenceTrace,
    pub converged: bool,
    pub iterations_used: usize,
}

/// Runs ADMM from a flat start.
pub fn run_admm(model: &NetworkModel, noisy: &ObfuscatedLoads, cfg: &AdmmConfig) -> Result<AdmmResult, AdmmError> {
    run_admm_from(model, noisy, cfg, AdmmState::flat(model, cfg.rho_init))
}

/// Runs ADMM from `state` for up to `cfg.t_max - state.iteration` iterations.
pub fn run_admm_from(
    model: &NetworkModel,
    noisy: &ObfuscatedLoads,
    cfg: &AdmmConfig,
    mut state: AdmmState,
) -> Result<AdmmResult, AdmmError> {
    cfg.validate()?;
    if !model.has_reference_costs() {
        return Err(AdmmError::MissingReferenceCosts);
    }
    if noisy.len() != model.loads().len() {
        return Err(AdmmError::LoadCountMismatch { expected: model.loads().len(), found: noisy.len() });
    }
    let mut trace = ConvergenceTrace::new();
    let mut boosted = false;
    let mut last = None;
    while state.iteration < cfg.t_max {
        let iter = state.iteration + 1;
        let rho = state.rho;
        let previous_bus = state.bus.clone();
        agent_step(model, noisy, cfg, &mut state, iter)?;
        bus_step(model, &mut state);
        update_duals(model, &mut state, rho);
        let (eps_p, eps_d) = compute_residuals(model, &state, &previous_bus, rho);
        let boosting = iter >= cfg.boost_start() && eps_p > cfg.primal_target;
        boosted |= boosting;
        trace.push(TraceRecord {
            iter,
            eps_p,
            eps_d,
            rho,
            total_cost: dispatch_cost(model, &state.consensus.generator),
            boosting,
        });
        let mut next = update_rho(rho, eps_p, eps_d, iter, cfg);
        if cfg.hold_after_boost && boosted {
            next = next.max(rho);
        }
        state.rho = next;
        state.iteration = iter;
        last = Some((eps_p, eps_d));
        if cfg.early_stop && eps_p <= cfg.primal_target && eps_d <= cfg.primal_target {
            break;
        }
    }
    let converged = last.is_some_and(|(eps_p, _)| eps_p <= cfg.primal_target);
    Ok(AdmmResult {
        hat_loads: state.consensus.load.clone(),
        iterations_used: trace.len(),
        state,
        trace,
        converged,
    })
}

#[cfg(feature = "parallel")]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Load, generator and line agents against the current bus responses.
fn agent_step(
    model: &NetworkModel,
    noisy: &ObfuscatedLoads,
    cfg: &AdmmConfig,
    state: &mut AdmmState,
    iter: usize,
) -> Result<(), AdmmError> {
    let rho = state.rho;
    let (bus, duals) = (&state.bus, &state.duals);
    let tilde = noisy.values();

    let loads = map_indexed(tilde.len(), |k| solve_load_agent(rho, duals.load[k], tilde[k], bus.load[k]));

    let generators = map_indexed(model.generators().len(), |k| {
        solve_generator_agent(rho, duals.generator[k], bus.generator[k], &model.generators()[k], cfg.beta)
            .map_err(|source| AdmmError::Generator { index: k, iteration: iter, source })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let line_polar = &state.line_polar;
    let lines = map_indexed(model.lines().len(), |l| {
        let buses = model.line_buses(l);
        let ends = [0, 1].map(|e| LineEndInput {
            lambda_s: duals.flow[l][e],
            lambda_v: duals.voltage[l][e],
            target_s: bus.flow[l][e],
            target_v: bus.voltage[buses[e]],
        });
        let bounds = buses.map(|b| (model.buses()[b].voltage_min, model.buses()[b].voltage_max));
        let slack = buses.map(|b| b == model.slack_index());
        let problem = LineProblem::new(&model.lines()[l], rho, ends, bounds, slack);
        solve_line_agent(&problem, line_polar[l], &cfg.line)
            .or_else(|_| solve_line_agent(&problem, PolarVoltages::FLAT, &cfg.line))
            .map_err(|source| AdmmError::Line { index: l, iteration: iter, source })
    })
    .into_iter()
    .collect::<Result<Vec<LineSolution>, _>>()?;

    let x = &mut state.consensus;
    x.load = loads;
    x.generator = generators;
    for (l, sol) in lines.into_iter().enumerate() {
        x.flow[l] = sol.flow;
        x.voltage[l] = sol.voltage;
        state.line_polar[l] = sol.polar;
    }
    Ok(())
}

struct BusResponse {
    generators: Vec<ComplexQuantity>,
    loads: Vec<ComplexQuantity>,
    flows: Vec<ComplexQuantity>,
    voltage: ComplexQuantity,
}

/// Bus agents against the fresh agent copies, with negated multipliers.
/// Attachments go generators, loads, then line ends, each ascending.
fn bus_step(model: &NetworkModel, state: &mut AdmmState) {
    let rho = state.rho;
    let (x, duals) = (&state.consensus, &state.duals);
    let responses = map_indexed(model.buses().len(), |b| {
        let gens = model.generators_at(b);
        let loads = model.loads_at(b);
        let ends = model.incident_lines(b);
        let mut attachments = Vec::with_capacity(gens.len() + loads.len() + ends.len());
        for &g in gens {
            attachments.push(Attachment {
                kind: AttachmentKind::Generator,
                multiplier: -duals.generator[g],
                target: x.generator[g],
            });
        }
        for &d in loads {
            attachments.push(Attachment { kind: AttachmentKind::Load, multiplier: -duals.load[d], target: x.load[d] });
        }
        let mut copies = Vec::with_capacity(ends.len());
        for end in ends {
            let e = end.end.index();
            attachments.push(Attachment {
                kind: AttachmentKind::Flow,
                multiplier: -duals.flow[end.line][e],
                target: x.flow[end.line][e],
            });
            copies.push(VoltageCopy { multiplier: -duals.voltage[end.line][e], target: x.voltage[end.line][e] });
        }
        let sol = solve_bus_agent(rho, &attachments, &copies);
        let voltage = if copies.is_empty() { state.bus.voltage[b] } else { sol.voltage };
        let (g_part, rest) = sol.values.split_at(gens.len());
        let (d_part, f_part) = rest.split_at(loads.len());
        BusResponse { generators: g_part.to_vec(), loads: d_part.to_vec(), flows: f_part.to_vec(), voltage }
    });

    let z = &mut state.bus;
    for (b, r) in responses.into_iter().enumerate() {
        for (&g, v) in model.generators_at(b).iter().zip(r.generators) {
            z.generator[g] = v;
        }
        for (&d, v) in model.loads_at(b).iter().zip(r.loads) {
            z.load[d] = v;
        }
        for (end, v) in model.incident_lines(b).iter().zip(r.flows) {
            z.flow[end.line][end.end.index()] = v;
        }
        z.voltage[b] = r.voltage;
    }
}
