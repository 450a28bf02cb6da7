use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use privopf::agents::{branch_flows, PolarVoltages};
use privopf::cases;
use privopf::network::{parse_case, parse_reference_dispatch, NetworkModel};
use privopf::validation::{dispatch_cost, fidelity_report, power_flow_residuals, privacy_loss};
use privopf::ComplexQuantity as C;

/// `S_ij = V_i·(Y·(V_i - V_j))*`, written independently of the library.
fn ohm(y: C, vi: C, vj: C) -> C {
    vi * (y * (vi - vj)).conj()
}

fn random_voltages(rng: &mut ChaCha8Rng, n: usize, slack: usize) -> Vec<C> {
    (0..n)
        .map(|b| {
            let angle = if b == slack { 0.0 } else { rng.random_range(-0.3..0.3) };
            C::from_polar(rng.random_range(0.92..1.08), angle)
        })
        .collect()
}

#[test]
fn ohm_residuals_match_an_independent_evaluator() {
    let model = parse_case(cases::CASE3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let v = random_voltages(&mut rng, 3, model.slack_index());
        let flows: Vec<[C; 2]> = (0..model.lines().len())
            .map(|_| [C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), C::new(0.2, -0.1)])
            .collect();
        let report = power_flow_residuals(
            &model,
            &v,
            &[C::ZERO; 2],
            &vec![C::ZERO; model.loads().len()],
            &flows,
        )
        .unwrap();
        let mut expected = 0.0f64;
        for (l, line) in model.lines().iter().enumerate() {
            let [i, j] = model.line_buses(l);
            expected = expected
                .max((flows[l][0] - ohm(line.admittance, v[i], v[j])).abs())
                .max((flows[l][1] - ohm(line.admittance, v[j], v[i])).abs());
        }
        assert!((report.max_ohm_residual - expected).abs() <= 1e-14, "{} vs {expected}", report.max_ohm_residual);
    }
}

/// Two buses, one line, loads closing KCL at each end.
fn two_bus() -> (NetworkModel, Vec<C>, Vec<C>, Vec<C>, Vec<[C; 2]>) {
    let text = "\
mpc.baseMVA = 100;
mpc.bus = [
	1	3	0	0	0	0	1	1	0	0	1	1.1	0.9;
	2	1	60	20	0	0	1	1	0	0	1	1.1	0.9;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	200	0;
];
mpc.branch = [
	1	2	0.01	0.1	0	250	0	0	0	0	1	-30	30;
];
mpc.gencost = [
	2	0	0	3	0.01	10	0;
];
";
    let model = parse_case(text).unwrap();
    let polar = PolarVoltages { magnitude: [1.02, 0.99], angle: [0.0, -0.05] };
    let flows = vec![branch_flows(model.lines()[0].admittance, &polar)];
    let v = polar.rectangular().to_vec();
    let dispatch = vec![flows[0][0]];
    let loads = vec![-flows[0][1]];
    let model = model
        .with_loads(vec![privopf::network::Load { bus_id: 2, demand: loads[0] }])
        .unwrap();
    (model, v, dispatch, loads, flows)
}

#[test]
fn self_consistent_point_has_no_residuals() {
    let (model, v, dispatch, loads, flows) = two_bus();
    let report = power_flow_residuals(&model, &v, &dispatch, &loads, &flows).unwrap();
    assert!(report.max_kcl_residual <= 1e-12 && report.max_ohm_residual <= 1e-12, "{report:?}");
    assert!(report.bound_violations.is_empty(), "{report:?}");

    let mut bumped = flows.clone();
    bumped[0][1] += C::new(0.01, 0.0);
    let report = power_flow_residuals(&model, &v, &dispatch, &loads, &bumped).unwrap();
    assert!((report.max_kcl_residual - 0.01).abs() < 1e-12);
    assert_eq!(report.worst_line, Some(0));
}

#[test]
fn bound_violations_are_named() {
    let (model, mut v, mut dispatch, loads, flows) = two_bus();
    v[1] = v[1].scale(1.2);
    dispatch[0] = C::new(2.5, 0.0);
    let report = power_flow_residuals(&model, &v, &dispatch, &loads, &flows).unwrap();
    let names: Vec<&str> = report.bound_violations.iter().map(|b| b.constraint.as_str()).collect();
    assert!(names.contains(&"bus 2 vmax"), "{names:?}");
    assert!(names.contains(&"gen 0 pmax"), "{names:?}");
    assert!(power_flow_residuals(&model, &v[..1], &dispatch, &loads, &flows).is_err());
}

#[test]
fn dispatch_cost_matches_an_independent_evaluator() {
    let model = parse_case(cases::CASE5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let p: Vec<C> = model.generators().iter().map(|_| C::new(rng.random_range(-1.0..6.0), 0.3)).collect();
        let mut expected = 0.0;
        for (g, s) in model.generators().iter().zip(&p) {
            // Horner form, a different evaluation order.
            expected += (g.cost_c2 * s.re + g.cost_c1) * s.re + g.cost_c0;
        }
        let got = dispatch_cost(&model, &p);
        assert!((got - expected).abs() <= 1e-14 * expected.abs().max(1.0), "{got} vs {expected}");
    }
    let zero = dispatch_cost(&model, &vec![C::ZERO; model.generators().len()]);
    assert_eq!(zero, model.generators().iter().map(|g| g.cost_c0).sum::<f64>());
}

#[test]
fn fidelity_band_is_closed() {
    let dispatch = parse_reference_dispatch(cases::CASE3_REF).unwrap();
    let model = parse_case(cases::CASE3).unwrap().load_reference_costs(&dispatch).unwrap();
    let at_reference = fidelity_report(&model, &dispatch, 0.1).unwrap();
    assert_eq!(at_reference.relative_gap, 0.0);
    assert!(at_reference.per_generator_in_band.iter().all(|&b| b));

    // Move generator 0 to the dispatch costing 1.1·O* (upper root of the quadratic).
    let g = &model.generators()[0];
    let target = 1.1 * g.reference_cost.unwrap();
    let p = (-g.cost_c1 + (g.cost_c1 * g.cost_c1 - 4.0 * g.cost_c2 * (g.cost_c0 - target)).sqrt()) / (2.0 * g.cost_c2);
    let mut edge = p;
    while g.cost(edge) > target {
        edge = edge.next_down();
    }
    let mut moved = dispatch.clone();
    moved[0] = C::new(edge, moved[0].im);
    assert!(fidelity_report(&model, &moved, 0.1).unwrap().per_generator_in_band[0]);
    moved[0] = C::new(p + 1e-6, moved[0].im);
    assert!(!fidelity_report(&model, &moved, 0.1).unwrap().per_generator_in_band[0]);
}

#[test]
fn privacy_loss_examples() {
    let a = [C::new(1.0, 2.0), C::new(-0.5, 0.0)];
    assert_eq!(privacy_loss(&a, &a).unwrap(), 0.0);
    let b = [C::new(1.3, 2.4), C::new(-0.5, 0.0)];
    assert!((privacy_loss(&b, &a).unwrap() - 0.25).abs() < 1e-15);
    assert!(privacy_loss(&a[..1], &a).is_err());
}
