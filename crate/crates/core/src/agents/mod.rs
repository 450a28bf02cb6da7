//! Local solvers for the four agent types of the fidelity phase.
//!
//! Load, generator and bus agents have closed-form minimizers. The line agent
//! solves a four-variable nonlinear problem over its end voltages.

mod bus;
mod generator;
mod line;
mod load;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bus::{flow_balance_residual, solve_bus_agent, Attachment, AttachmentKind, BusSolution, VoltageCopy};
pub use generator::{cost_band_intervals, solve_generator_agent};
pub use line::{branch_flows, solve_line_agent, LineEndInput, LineProblem, LineSolution, PolarVoltages};
pub use load::solve_load_agent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("generator cost band is empty within the dispatch bounds (reference cost {reference_cost}, beta {beta})")]
    InfeasibleCostBand { reference_cost: f64, beta: f64 },
    #[error("generator has no reference cost")]
    MissingReferenceCost,
    #[error("line solve did not converge after {outer} outer / {inner} inner iterations (projected gradient {gradient:e}, violation {violation:e})")]
    LineSolveFailed { outer: usize, inner: usize, gradient: f64, violation: f64 },
}

/// Settings of the line agent's augmented-Lagrangian / projected-Newton solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSolverConfig {
    /// Projected-gradient tolerance, relative to `max(1, ρ)`.
    pub stationarity_tol: f64,
    pub max_newton_iters: usize,
    /// Initial constraint penalty, relative to the objective's largest
    /// diagonal curvature at the warm start.
    pub constraint_penalty_init: f64,
    pub penalty_growth: f64,
    pub max_outer_iters: usize,
}

impl Default for LineSolverConfig {
    fn default() -> Self {
        Self {
            stationarity_tol: 1e-8,
            max_newton_iters: 100,
            constraint_penalty_init: 1e2,
            penalty_growth: 10.0,
            max_outer_iters: 8,
        }
    }
}
