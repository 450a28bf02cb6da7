//! Line agent: proximal matching of flows and end voltages subject to the line
//! physics and limits.
//!
//! The decision variables are the polar end voltages
//! `x = (|V_i|, ∠V_i, |V_j|, ∠V_j)`. Flows are functions of `x` through Ohm's
//! law, so the power-flow equality holds by construction. Inequalities
//! (angle difference, thermal limits) go through an augmented-Lagrangian outer
//! loop; magnitude bounds and the slack angle are a box handled by projected
//! Newton steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AgentError, LineSolverConfig};
use crate::complex::ComplexQuantity;
use crate::network::Line;

const VIOLATION_TOL: f64 = 1e-8;
const MAX_PENALTY: f64 = 1e12;
/// Newton decrements below this (relative to the objective) are roundoff.
const DECREMENT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarVoltages {
    pub magnitude: [f64; 2],
    pub angle: [f64; 2],
}

impl PolarVoltages {
    pub const FLAT: PolarVoltages = PolarVoltages { magnitude: [1.0, 1.0], angle: [0.0, 0.0] };

    fn to_vector(self) -> [f64; 4] {
        [self.magnitude[0], self.angle[0], self.magnitude[1], self.angle[1]]
    }

    fn from_vector(x: [f64; 4]) -> Self {
        Self { magnitude: [x[0], x[2]], angle: [x[1], x[3]] }
    }

    pub fn rectangular(&self) -> [ComplexQuantity; 2] {
        [
            ComplexQuantity::from_polar(self.magnitude[0], self.angle[0]),
            ComplexQuantity::from_polar(self.magnitude[1], self.angle[1]),
        ]
    }
}

/// Multipliers and bus-side targets for one end of the line.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineEndInput {
    pub lambda_s: ComplexQuantity,
    pub lambda_v: ComplexQuantity,
    pub target_s: ComplexQuantity,
    pub target_v: ComplexQuantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineProblem {
    pub rho: f64,
    pub ends: [LineEndInput; 2],
    pub admittance: ComplexQuantity,
    pub thermal_limit: f64,
    pub angle_limit: f64,
    pub voltage_bounds: [(f64, f64); 2],
    /// Angle of that end pinned to zero.
    pub slack: [bool; 2],
}

impl LineProblem {
    pub fn new(
        line: &Line,
        rho: f64,
        ends: [LineEndInput; 2],
        voltage_bounds: [(f64, f64); 2],
        slack: [bool; 2],
    ) -> Self {
        Self {
            rho,
            ends,
            admittance: line.admittance,
            thermal_limit: line.thermal_limit,
            angle_limit: line.angle_limit,
            voltage_bounds,
            slack,
        }
    }

    /// Proximal objective at polar voltages `v`.
    pub fn objective(&self, v: &PolarVoltages) -> f64 {
        self.objective_jet(v.to_vector()).value
    }

    /// Gradient of [`LineProblem::objective`] with respect to
    /// `(|V_i|, ∠V_i, |V_j|, ∠V_j)`.
    pub fn gradient(&self, v: &PolarVoltages) -> [f64; 4] {
        self.objective_jet(v.to_vector()).grad
    }

    /// Largest violation of the line constraints (bounds, slack, angle, thermal).
    pub fn violation(&self, v: &PolarVoltages) -> f64 {
        let x = v.to_vector();
        let (lower, upper) = self.box_bounds();
        let mut worst = 0.0f64;
        for k in 0..4 {
            worst = worst.max(lower[k] - x[k]).max(x[k] - upper[k]);
        }
        for g in self.constraints(x) {
            worst = worst.max(g.value * g.scale);
        }
        worst
    }

    fn box_bounds(&self) -> ([f64; 4], [f64; 4]) {
        let angle = |slack: bool| if slack { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
        let (ai, aj) = (angle(self.slack[0]), angle(self.slack[1]));
        (
            [self.voltage_bounds[0].0, ai.0, self.voltage_bounds[1].0, aj.0],
            [self.voltage_bounds[0].1, ai.1, self.voltage_bounds[1].1, aj.1],
        )
    }

    fn objective_jet(&self, x: [f64; 4]) -> Jet {
        let parts = LineJets::at(x, self.admittance);
        let mut total = Jet::constant(0.0);
        for (e, end) in self.ends.iter().enumerate() {
            for (value, lambda, target) in [
                (&parts.flow[e], end.lambda_s, end.target_s),
                (&parts.voltage[e], end.lambda_v, end.target_v),
            ] {
                for (component, l, t) in [(&value.0, lambda.re, target.re), (&value.1, lambda.im, target.im)] {
                    let gap = component.add_constant(-t);
                    total = total.add(&component.scale(l)).add(&gap.mul(&gap).scale(0.5 * self.rho));
                }
            }
        }
        total
    }

    /// Inequalities `g(x) ≤ 0`, each normalized; `scale` converts back to
    /// physical units for reporting.
    fn constraints(&self, x: [f64; 4]) -> Vec<Constraint> {
        let parts = LineJets::at(x, self.admittance);
        let mut out = Vec::with_capacity(4);
        let delta = Jet::variable(x[1], 1).add(&Jet::variable(x[3], 3).scale(-1.0));
        out.push(Constraint { value: 0.0, scale: 1.0, jet: delta.add_constant(-self.angle_limit) });
        out.push(Constraint { value: 0.0, scale: 1.0, jet: delta.scale(-1.0).add_constant(-self.angle_limit) });
        if self.thermal_limit.is_finite() {
            let limit_sq = self.thermal_limit * self.thermal_limit;
            for (p, q) in &parts.flow {
                let jet = p.mul(p).add(&q.mul(q)).scale(1.0 / limit_sq).add_constant(-1.0);
                out.push(Constraint { value: 0.0, scale: limit_sq, jet });
            }
        }
        for c in &mut out {
            c.value = c.jet.value;
        }
        out
    }

    fn augmented(&self, x: [f64; 4], multipliers: &[f64], penalty: f64) -> Jet {
        let mut total = self.objective_jet(x);
        for (c, &nu) in self.constraints(x).iter().zip(multipliers) {
            let shifted = c.jet.scale(penalty).add_constant(nu);
            if shifted.value > 0.0 {
                total = total.add(&shifted.mul(&shifted).add_constant(-nu * nu).scale(0.5 / penalty));
            }
        }
        total
    }
}

struct Constraint {
    value: f64,
    scale: f64,
    jet: Jet,
}

/// Flows `[S_ij, S_ji]` from polar voltages by Ohm's law,
/// `S_ef = Y*·(|V_e|² - V_e·V_f*)`.
pub fn branch_flows(admittance: ComplexQuantity, v: &PolarVoltages) -> [ComplexQuantity; 2] {
    let parts = LineJets::at(v.to_vector(), admittance);
    [
        ComplexQuantity::new(parts.flow[0].0.value, parts.flow[0].1.value),
        ComplexQuantity::new(parts.flow[1].0.value, parts.flow[1].1.value),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSolution {
    pub flow: [ComplexQuantity; 2],
    pub voltage: [ComplexQuantity; 2],
    pub polar: PolarVoltages,
    pub newton_iterations: usize,
    pub outer_iterations: usize,
}

/// Solves the line agent's subproblem from the warm start `warm`.
pub fn solve_line_agent(
    problem: &LineProblem,
    warm: PolarVoltages,
    cfg: &LineSolverConfig,
) -> Result<LineSolution, AgentError> {
    let (lower, upper) = problem.box_bounds();
    let mut x = warm.to_vector();
    for k in 0..4 {
        x[k] = x[k].clamp(lower[k], upper[k]);
    }
    let tol = cfg.stationarity_tol * problem.rho.max(1.0);
    let n_constraints = problem.constraints(x).len();
    let mut multipliers = vec![0.0; n_constraints];
    // Penalties below the objective's curvature make the multiplier updates crawl.
    let curvature = problem.objective_jet(x).hess.iter().enumerate().fold(1.0f64, |m, (k, row)| m.max(row[k].abs()));
    let mut penalty = cfg.constraint_penalty_init * curvature;
    let mut prev_violation = f64::INFINITY;
    let mut newton_total = 0;
    let mut last = (0.0, 0.0);

    for outer in 0..cfg.max_outer_iters.max(1) {
        let inner = projected_newton(
            |y| problem.augmented(y, &multipliers, penalty),
            &mut x,
            &lower,
            &upper,
            tol,
            cfg.max_newton_iters,
        );
        newton_total += inner.iterations;
        let constraints = problem.constraints(x);
        let violation = constraints.iter().fold(0.0f64, |m, c| m.max(c.value * c.scale));
        last = (inner.gradient_norm, violation);
        if inner.stationary && violation <= VIOLATION_TOL {
            let polar = PolarVoltages::from_vector(x);
            return Ok(LineSolution {
                flow: branch_flows(problem.admittance, &polar),
                voltage: polar.rectangular(),
                polar,
                newton_iterations: newton_total,
                outer_iterations: outer + 1,
            });
        }
        for (nu, c) in multipliers.iter_mut().zip(&constraints) {
            *nu = (*nu + penalty * c.value).max(0.0);
        }
        if violation > 0.25 * prev_violation && penalty < MAX_PENALTY {
            penalty *= cfg.penalty_growth;
        }
        prev_violation = violation;
    }
    Err(AgentError::LineSolveFailed {
        outer: cfg.max_outer_iters,
        inner: newton_total,
        gradient: last.0,
        violation: last.1,
    })
}

struct InnerResult {
    iterations: usize,
    gradient_norm: f64,
    /// Projected gradient below tolerance, or the Newton decrement below
    /// roundoff with no active bound pulling.
    stationary: bool,
}

/// `‖x - P(x - ∇f)‖∞` on the box.
fn projected_gradient_norm(x: &[f64; 4], g: &[f64; 4], lower: &[f64; 4], upper: &[f64; 4]) -> f64 {
    (0..4).fold(0.0f64, |m, k| m.max((x[k] - (x[k] - g[k]).clamp(lower[k], upper[k])).abs()))
}

/// Bertsekas-style projected Newton on a box, with Armijo search along the
/// projection arc.
fn projected_newton(
    f: impl Fn([f64; 4]) -> Jet,
    x: &mut [f64; 4],
    lower: &[f64; 4],
    upper: &[f64; 4],
    tol: f64,
    max_iters: usize,
) -> InnerResult {
    const SIGMA: f64 = 1e-4;
    let mut jet = f(*x);
    let mut pg = projected_gradient_norm(x, &jet.grad, lower, upper);
    let mut iterations = 0;
    while pg > tol && iterations < max_iters {
        iterations += 1;
        let g = jet.grad;
        let margin = pg.min(1e-3);
        let active: [bool; 4] = std::array::from_fn(|k| {
            lower[k] == upper[k]
                || (x[k] <= lower[k] + margin && g[k] > 0.0)
                || (x[k] >= upper[k] - margin && g[k] < 0.0)
        });
        let free: Vec<usize> = (0..4).filter(|&k| !active[k]).collect();

        let mut d = [0.0; 4];
        for k in 0..4 {
            if active[k] {
                d[k] = -g[k];
            }
        }
        if !free.is_empty() {
            let step = newton_direction(&jet, &free);
            for (i, &k) in free.iter().enumerate() {
                d[k] = step[i];
            }
        }
        let active_pull = (0..4)
            .filter(|&k| active[k])
            .fold(0.0f64, |m, k| m.max((x[k] - (x[k] - g[k]).clamp(lower[k], upper[k])).abs()));
        let decrement = -free.iter().map(|&k| g[k] * d[k]).sum::<f64>();
        if active_pull <= tol && decrement <= DECREMENT_FLOOR * jet.value.abs().max(1.0) {
            return InnerResult { iterations, gradient_norm: pg, stationary: true };
        }

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: [f64; 4] = std::array::from_fn(|k| (x[k] + alpha * d[k]).clamp(lower[k], upper[k]));
            let predicted: f64 = (0..4)
                .map(|k| if active[k] { g[k] * (x[k] - trial[k]) } else { -alpha * g[k] * d[k] })
                .sum();
            let candidate = f(trial);
            if candidate.value <= jet.value - SIGMA * predicted {
                *x = trial;
                jet = candidate;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        pg = projected_gradient_norm(x, &jet.grad, lower, upper);
        if !accepted {
            break;
        }
    }
    InnerResult { iterations, gradient_norm: pg, stationary: pg <= tol }
}

/// Newton step on the free variables, with the Hessian shifted until it is
/// positive definite.
fn newton_direction(jet: &Jet, free: &[usize]) -> Vec<f64> {
    let n = free.len();
    let h = DMatrix::from_fn(n, n, |a, b| jet.hess[free[a]][free[b]]);
    let rhs = DVector::from_iterator(n, free.iter().map(|&k| -jet.grad[k]));
    let scale = (0..n).fold(0.0f64, |m, k| m.max(h[(k, k)].abs())).max(1e-12);
    let mut shift = 0.0;
    for _ in 0..60 {
        let shifted = &h + DMatrix::identity(n, n) * shift;
        if let Some(chol) = shifted.cholesky() {
            let step = chol.solve(&rhs);
            if step.iter().all(|v| v.is_finite()) {
                return step.iter().copied().collect();
            }
        }
        shift = if shift == 0.0 { 1e-10 * scale } else { shift * 10.0 };
    }
    rhs.iter().map(|v| v / scale).collect()
}

/// Value, gradient and Hessian of a scalar function of the four voltage
/// parameters.
#[derive(Debug, Clone, Copy)]
struct Jet {
    value: f64,
    grad: [f64; 4],
    hess: [[f64; 4]; 4],
}

impl Jet {
    fn constant(value: f64) -> Self {
        Self { value, grad: [0.0; 4], hess: [[0.0; 4]; 4] }
    }

    fn variable(value: f64, index: usize) -> Self {
        let mut j = Self::constant(value);
        j.grad[index] = 1.0;
        j
    }

    fn add(&self, other: &Jet) -> Jet {
        let mut out = *self;
        out.value += other.value;
        for a in 0..4 {
            out.grad[a] += other.grad[a];
            for b in 0..4 {
                out.hess[a][b] += other.hess[a][b];
            }
        }
        out
    }

    fn add_constant(&self, c: f64) -> Jet {
        let mut out = *self;
        out.value += c;
        out
    }

    fn scale(&self, k: f64) -> Jet {
        let mut out = *self;
        out.value *= k;
        for a in 0..4 {
            out.grad[a] *= k;
            for b in 0..4 {
                out.hess[a][b] *= k;
            }
        }
        out
    }

    fn mul(&self, other: &Jet) -> Jet {
        let mut out = Jet::constant(self.value * other.value);
        for a in 0..4 {
            out.grad[a] = self.grad[a] * other.value + self.value * other.grad[a];
            for b in 0..4 {
                out.hess[a][b] = self.hess[a][b] * other.value
                    + self.value * other.hess[a][b]
                    + self.grad[a] * other.grad[b]
                    + other.grad[a] * self.grad[b];
            }
        }
        out
    }

    /// `f(self)` given `f`, `f'`, `f''` at `self.value`.
    fn chain(&self, f0: f64, f1: f64, f2: f64) -> Jet {
        let mut out = Jet::constant(f0);
        for a in 0..4 {
            out.grad[a] = f1 * self.grad[a];
            for b in 0..4 {
                out.hess[a][b] = f2 * self.grad[a] * self.grad[b] + f1 * self.hess[a][b];
            }
        }
        out
    }

    fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
}

/// Flow and voltage components as jets in the polar variables.
struct LineJets {
    /// `(P, Q)` for `S_ij` and `S_ji`.
    flow: [(Jet, Jet); 2],
    /// `(Re, Im)` of `V_i` and `V_j`.
    voltage: [(Jet, Jet); 2],
}

impl LineJets {
    fn at(x: [f64; 4], y: ComplexQuantity) -> Self {
        let vm_i = Jet::variable(x[0], 0);
        let va_i = Jet::variable(x[1], 1);
        let vm_j = Jet::variable(x[2], 2);
        let va_j = Jet::variable(x[3], 3);
        let delta = va_i.add(&va_j.scale(-1.0));
        let product = vm_i.mul(&vm_j);
        // V_i·V_j* = a + jb
        let a = product.mul(&delta.cos());
        let b = product.mul(&delta.sin());
        let (g, s) = (y.re, y.im);
        // S_ij = (g - js)(|V_i|² - a - jb)
        let wi = vm_i.mul(&vm_i).add(&a.scale(-1.0));
        let p_ij = wi.scale(g).add(&b.scale(-s));
        let q_ij = wi.scale(-s).add(&b.scale(-g));
        // S_ji = (g - js)(|V_j|² - a + jb)
        let wj = vm_j.mul(&vm_j).add(&a.scale(-1.0));
        let p_ji = wj.scale(g).add(&b.scale(s));
        let q_ji = wj.scale(-s).add(&b.scale(g));
        Self {
            flow: [(p_ij, q_ij), (p_ji, q_ji)],
            voltage: [
                (vm_i.mul(&va_i.cos()), vm_i.mul(&va_i.sin())),
                (vm_j.mul(&va_j.cos()), vm_j.mul(&va_j.sin())),
            ],
        }
    }
}
