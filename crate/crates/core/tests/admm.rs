use privopf::admm::{
    compute_residuals, run_admm, run_admm_from, update_duals, AdmmConfig, AdmmState, ConvergenceTrace, StateSnapshot,
    TraceRecord,
};
use privopf::cases;
use privopf::network::{parse_case, parse_reference_dispatch, NetworkModel};
use privopf::privacy::{obfuscate_all, Mechanism, PrivacyParams};
use privopf::ComplexQuantity as C;

fn model(text: &str, refs: &str) -> NetworkModel {
    parse_case(text).unwrap().load_reference_costs(&parse_reference_dispatch(refs).unwrap()).unwrap()
}

fn params() -> PrivacyParams {
    PrivacyParams::new(1.0, 0.1, Mechanism::PolarLaplace).unwrap()
}

#[test]
fn dual_step_examples() {
    let m = model(cases::CASE3, cases::CASE3_REF);
    let mut state = AdmmState::flat(&m, 2.0);
    let before = state.duals.clone();
    update_duals(&m, &mut state, 2.0);
    assert_eq!(state.duals, before, "zero residuals leave the duals alone");

    state.consensus.load[0] = state.bus.load[0] + C::new(0.1, 0.0);
    update_duals(&m, &mut state, 2.0);
    assert!((state.duals.load[0] - C::new(0.2, 0.0)).max_abs() < 1e-15);
    assert_eq!(state.duals.load[1], C::ZERO);
}

#[test]
fn residual_examples() {
    let m = model(cases::CASE3, cases::CASE3_REF);
    let state = AdmmState::flat(&m, 10.0);
    assert_eq!(compute_residuals(&m, &state, &state.bus, 10.0), (0.0, 0.0));

    let mut gapped = state.clone();
    gapped.consensus.load[0] = C::new(0.3, 0.0);
    gapped.consensus.generator[1] = C::new(0.0, -0.5);
    assert_eq!(compute_residuals(&m, &gapped, &state.bus, 10.0).0, 0.5);

    // The line voltage copies are compared with the bus voltage.
    let mut moved = state.clone();
    moved.bus.voltage[2] = C::new(1.0, 0.25);
    let (eps_p, eps_d) = compute_residuals(&m, &moved, &state.bus, 10.0);
    assert_eq!((eps_p, eps_d), (0.25, 2.5));
}

#[test]
fn snapshot_reproduces_recorded_residuals() {
    let m = model(cases::CASE5, cases::CASE5_REF);
    let noisy = obfuscate_all(&m, &params(), None, 4).unwrap();
    let cfg = AdmmConfig { t_max: 5000, early_stop: false, ..AdmmConfig::default() };
    for stop in [37, 4600] {
        let head = run_admm_from(&m, &noisy, &AdmmConfig { t_max: stop, ..cfg }, AdmmState::flat(&m, cfg.rho_init))
            .unwrap();
        let step = run_admm_from(&m, &noisy, &AdmmConfig { t_max: stop + 1, ..cfg }, head.state.clone()).unwrap();
        let record = *step.trace.last().unwrap();
        assert_eq!((record.iter, record.rho), (stop + 1, head.state.rho));

        let snap = StateSnapshot::new(step.state.clone(), head.state.bus.clone());
        let restored = StateSnapshot::from_json(&snap.to_json()).unwrap();
        assert_eq!(restored, snap);
        let (eps_p, eps_d) = compute_residuals(&m, &restored.state, &restored.previous_bus, record.rho);
        assert_eq!((eps_p, eps_d), (record.eps_p, record.eps_d), "iteration {}", stop + 1);
    }
}

#[test]
fn snapshot_version_is_checked() {
    let m = model(cases::CASE3, cases::CASE3_REF);
    let state = AdmmState::flat(&m, 100.0);
    let text = StateSnapshot::new(state.clone(), state.bus.clone()).to_json().replacen("\"version\": 1", "\"version\": 7", 1);
    assert!(StateSnapshot::from_json(&text).unwrap_err().contains("version"));
}

#[test]
fn trace_records_boosting_and_bounds() {
    let m = model(cases::CASE5, cases::CASE5_REF);
    let noisy = obfuscate_all(&m, &params(), None, 1).unwrap();
    let cfg = AdmmConfig { t_max: 400, early_stop: false, ..AdmmConfig::default() };
    let r = run_admm(&m, &noisy, &cfg).unwrap();
    assert_eq!(r.trace.len(), 400);
    let start = cfg.boost_start();
    assert_eq!(start, 360);
    for rec in r.trace.records() {
        assert!(cfg.rho_min <= rec.rho && rec.rho <= cfg.rho_max);
        assert_eq!(rec.boosting, rec.iter >= start && rec.eps_p > cfg.primal_target, "iteration {}", rec.iter);
    }
    // Once boosting has fired, ρ never decreases.
    let first = r.trace.records().iter().position(|x| x.boosting);
    if let Some(first) = first {
        assert!(r.trace.records()[first..].windows(2).all(|w| w[1].rho >= w[0].rho));
    }
}

#[test]
fn early_stop_and_convergence_flag() {
    let m = model(cases::CASE9, cases::CASE9_REF);
    let noisy = obfuscate_all(&m, &params(), None, 0).unwrap();
    let cfg = AdmmConfig::default();
    let r = run_admm(&m, &noisy, &cfg).unwrap();
    let last = r.trace.last().unwrap();
    assert_eq!(r.iterations_used, last.iter);
    if r.iterations_used < cfg.t_max {
        assert!(last.eps_p <= cfg.primal_target && last.eps_d <= cfg.primal_target);
    }
    assert_eq!(r.converged, last.eps_p <= cfg.primal_target);
    assert_eq!(r.hat_loads, r.state.consensus.load);
}

#[test]
fn errors_are_reported() {
    let bare = parse_case(cases::CASE3).unwrap();
    let noisy = obfuscate_all(&bare, &params(), None, 0).unwrap();
    assert!(run_admm(&bare, &noisy, &AdmmConfig::default()).is_err());

    let m = model(cases::CASE3, cases::CASE3_REF);
    let nine_loads = privopf::ObfuscatedLoads::new(vec![C::ZERO; 9], params(), 0);
    assert!(run_admm(&m, &nine_loads, &AdmmConfig::default()).is_err());

    for bad in [
        AdmmConfig { rho_init: 1.0, ..AdmmConfig::default() },
        AdmmConfig { t_max: 0, ..AdmmConfig::default() },
        AdmmConfig { beta: -0.1, ..AdmmConfig::default() },
    ] {
        assert!(run_admm(&m, &noisy, &bad).is_err());
    }
}

#[test]
fn trace_csv_layout() {
    let mut trace = ConvergenceTrace::new();
    trace.push(TraceRecord { iter: 1, eps_p: 0.5, eps_d: 0.25, rho: 100.0, total_cost: 12.5, boosting: false });
    trace.push(TraceRecord { iter: 2, eps_p: 0.125, eps_d: 1e-20, rho: 102.0, total_cost: 12.0, boosting: true });
    let text = trace.to_csv_string();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,eps_p,eps_d,rho,total_cost,boosting"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], "2");
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 1e-20);
    assert_eq!(rows[1][5], "true");
    assert_eq!(trace.at(2).unwrap().rho, 102.0);
    assert!(trace.at(3).is_none());
}
