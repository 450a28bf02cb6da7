use super::AgentError;
use crate::complex::ComplexQuantity;
use crate::network::Generator;

/// Closed intervals of active power `p ∈ [p_min, p_max]` whose cost lies in
/// the band `[O*(1-β), O*(1+β)]`, ascending. At most two for a convex cost.
///
/// Interval ends are nudged inward by a few ulps where needed so that
/// [`Generator::cost`] evaluated at an end lands inside the band exactly.
pub fn cost_band_intervals(gen: &Generator, beta: f64) -> Result<Vec<(f64, f64)>, AgentError> {
    let reference = gen.reference_cost.ok_or(AgentError::MissingReferenceCost)?;
    let a = reference * (1.0 - beta);
    let b = reference * (1.0 + beta);
    let (lo, hi) = (a.min(b), a.max(b));

    let exact = clip(band_preimage(gen, lo, hi), gen);
    if !exact.is_empty() {
        return Ok(exact.into_iter().map(|iv| tighten(iv, gen, lo, hi)).collect());
    }
    let tol = 1e-12 * reference.abs().max(1.0);
    let inflated = clip(band_preimage(gen, lo - tol, hi + tol), gen);
    if inflated.is_empty() {
        return Err(AgentError::InfeasibleCostBand { reference_cost: reference, beta });
    }
    Ok(inflated)
}

/// Minimizes `λ·S + (ρ/2)‖S - S_bus‖²` over the generator bounds and the
/// cost band.
pub fn solve_generator_agent(
    rho: f64,
    lambda: ComplexQuantity,
    s_bus: ComplexQuantity,
    gen: &Generator,
    beta: f64,
) -> Result<ComplexQuantity, AgentError> {
    let target = s_bus - lambda.scale(1.0 / rho);
    let mut best: Option<(f64, f64)> = None;
    for (start, end) in cost_band_intervals(gen, beta)? {
        let p = target.re.clamp(start, end);
        let dist = (p - target.re) * (p - target.re);
        // Intervals ascend, so strict improvement keeps the smaller p on ties.
        if best.is_none_or(|(_, d)| dist < d) {
            best = Some((p, dist));
        }
    }
    let (p, _) = best.expect("cost_band_intervals returns at least one interval");
    let q = target.im.clamp(gen.s_min.im, gen.s_max.im);
    Ok(ComplexQuantity::new(p, q))
}

/// `{p : lo ≤ c2·p² + c1·p + c0 ≤ hi}` as ascending closed intervals.
fn band_preimage(gen: &Generator, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let (c2, c1, c0) = (gen.cost_c2, gen.cost_c1, gen.cost_c0);
    if c2 > 0.0 {
        let Some((a, b)) = quadratic_roots(c2, c1, c0 - hi) else {
            return Vec::new();
        };
        match quadratic_roots(c2, c1, c0 - lo) {
            Some((s1, s2)) if s1 < s2 => {
                let mut out = Vec::with_capacity(2);
                if a <= s1 {
                    out.push((a, s1));
                }
                if s2 <= b {
                    out.push((s2, b));
                }
                out
            }
            _ => vec![(a, b)],
        }
    } else if c1 != 0.0 {
        let (x, y) = ((lo - c0) / c1, (hi - c0) / c1);
        vec![(x.min(y), x.max(y))]
    } else if lo <= c0 && c0 <= hi {
        vec![(f64::NEG_INFINITY, f64::INFINITY)]
    } else {
        Vec::new()
    }
}

/// Real roots of `a·x² + b·x + c` (`a > 0`), ascending; numerically stable form.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return Some((0.0, 0.0));
    }
    let (r1, r2) = (q / a, c / q);
    Some((r1.min(r2), r1.max(r2)))
}

fn clip(intervals: Vec<(f64, f64)>, gen: &Generator) -> Vec<(f64, f64)> {
    intervals
        .into_iter()
        .map(|(a, b)| (a.max(gen.s_min.re), b.min(gen.s_max.re)))
        .filter(|(a, b)| a <= b)
        .collect()
}

fn tighten((start, end): (f64, f64), gen: &Generator, lo: f64, hi: f64) -> (f64, f64) {
    let inside = |p: f64| {
        let c = gen.cost(p);
        lo <= c && c <= hi
    };
    let nudge = |mut p: f64, step: fn(f64) -> f64| {
        for _ in 0..64 {
            if inside(p) {
                return Some(p);
            }
            p = step(p);
        }
        None
    };
    match (nudge(start, f64::next_up), nudge(end, f64::next_down)) {
        (Some(a), Some(b)) if a <= b => (a, b),
        _ => (start, end),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generator(c2: f64, c1: f64, c0: f64, reference: f64, bounds: (f64, f64)) -> Generator {
        Generator {
            bus_id: 1,
            s_min: ComplexQuantity::new(bounds.0, -1.0),
            s_max: ComplexQuantity::new(bounds.1, 1.0),
            cost_c2: c2,
            cost_c1: c1,
            cost_c0: c0,
            reference_cost: Some(reference),
        }
    }

    fn solve(gen: &Generator, beta: f64, p_bus: f64, lambda: f64) -> f64 {
        solve_generator_agent(1.0, ComplexQuantity::new(lambda, 0.0), ComplexQuantity::new(p_bus, 0.0), gen, beta)
            .unwrap()
            .re
    }

    #[test]
    fn interior_target_is_kept() {
        let gen = generator(1.0, 1.0, 0.0, 2.0, (0.0, 3.0));
        assert_eq!(solve(&gen, 0.5, 1.0, 0.0), 1.0);
    }

    #[test]
    fn linear_cost_band_edge() {
        let gen = generator(0.0, 1.0, 0.0, 1.0, (0.0, 2.0));
        let p = solve(&gen, 0.1, 2.0, 0.0);
        assert!((p - 1.1).abs() < 1e-15, "{p}");
        assert!(gen.cost(p) <= 1.1);
    }

    #[test]
    fn point_band() {
        let gen = generator(1.0, 0.0, 0.0, 1.0, (0.0, 2.0));
        for p_bus in [0.0, 0.5, 1.7, 2.0] {
            assert_eq!(solve(&gen, 0.0, p_bus, 0.0), 1.0);
        }
    }

    #[test]
    fn two_intervals_and_ties() {
        // cost p² on [-2, 2], band [0.9, 1.1]: |p| ∈ [√0.9, √1.1]
        let gen = generator(1.0, 0.0, 0.0, 1.0, (-2.0, 2.0));
        let ivs = cost_band_intervals(&gen, 0.1).unwrap();
        assert_eq!(ivs.len(), 2);
        assert!((ivs[0].0 + 1.1f64.sqrt()).abs() < 1e-12 && (ivs[0].1 + 0.9f64.sqrt()).abs() < 1e-12);
        assert!((ivs[1].0 - 0.9f64.sqrt()).abs() < 1e-12 && (ivs[1].1 - 1.1f64.sqrt()).abs() < 1e-12);
        assert!((solve(&gen, 0.1, 0.2, 0.0) - 0.9f64.sqrt()).abs() < 1e-12);
        assert!((solve(&gen, 0.1, -0.2, 0.0) + 0.9f64.sqrt()).abs() < 1e-12);
        // point band at ±1, target equidistant: the smaller p wins
        assert_eq!(solve(&gen, 0.0, 0.0, 0.0), -1.0);
    }

    #[test]
    fn reactive_part_is_clamped() {
        let gen = generator(0.0, 1.0, 0.0, 1.0, (0.0, 2.0));
        let s = solve_generator_agent(2.0, ComplexQuantity::new(0.0, -2.0), ComplexQuantity::new(1.0, 0.5), &gen, 0.1)
            .unwrap();
        assert_eq!(s.im, 1.0);
    }

    #[test]
    fn empty_band_is_an_error() {
        // reference cost unreachable within [0, 1]
        let gen = generator(0.0, 1.0, 0.0, 5.0, (0.0, 1.0));
        assert!(matches!(
            solve_generator_agent(1.0, ComplexQuantity::ZERO, ComplexQuantity::ZERO, &gen, 0.1),
            Err(AgentError::InfeasibleCostBand { .. })
        ));
        let mut gen = gen;
        gen.reference_cost = None;
        assert_eq!(cost_band_intervals(&gen, 0.1), Err(AgentError::MissingReferenceCost));
    }

    #[test]
    fn interval_ends_are_inside_band() {
        let gen = generator(1100.0, 500.0, 0.0, 2479.3, (0.0, 3.0));
        for beta in [0.0, 0.01, 0.1, 0.3] {
            for (a, b) in cost_band_intervals(&gen, beta).unwrap() {
                for p in [a, b] {
                    let c = gen.cost(p);
                    assert!(c >= 2479.3 * (1.0 - beta) - 1e-9 && c <= 2479.3 * (1.0 + beta) + 1e-9);
                    if beta > 0.0 {
                        assert!(c >= 2479.3 * (1.0 - beta) && c <= 2479.3 * (1.0 + beta), "beta {beta} p {p}");
                    }
                }
            }
        }
    }
}
