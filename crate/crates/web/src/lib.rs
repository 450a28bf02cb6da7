//! Browser bindings for three interactive views: the obfuscated-load scatter,
//! the piecewise mechanism's output distribution, and an ADMM restoration run
//! on a bundled case. Each binding returns a JSON string; the `*_json`
//! functions do the work and are plain Rust.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use privopf::admm::{run_admm, AdmmConfig};
use privopf::cases;
use privopf::network::{parse_case, parse_reference_dispatch, NetworkModel};
use privopf::privacy::{
    default_ranges, load_stream, obfuscate_all, piecewise_obfuscate, Mechanism, PiecewiseConstants, PrivacyParams,
};
use privopf::validation::{fidelity_report, privacy_loss};

fn bundled(name: &str) -> Result<NetworkModel, String> {
    let (_, text, refs) = cases::ALL
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| format!("unknown case {name}"))?;
    let model = parse_case(text).map_err(|e| e.to_string())?;
    let dispatch = parse_reference_dispatch(refs).map_err(|e| e.to_string())?;
    model.load_reference_costs(&dispatch).map_err(|e| e.to_string())
}

fn mechanism(name: &str) -> Result<Mechanism, String> {
    match name {
        "laplace" => Ok(Mechanism::PolarLaplace),
        "piecewise" => Ok(Mechanism::Piecewise),
        other => Err(format!("unknown mechanism {other}")),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[derive(Serialize)]
struct ScatterLoad {
    original: [f64; 2],
    samples: Vec<[f64; 2]>,
}

/// `draws` obfuscations of every load of a bundled case, seeds
/// `seed..seed + draws`.
pub fn obfuscation_scatter_json(
    case: &str,
    epsilon: f64,
    alpha: f64,
    mechanism_name: &str,
    draws: u32,
    seed: u64,
) -> Result<String, String> {
    let model = bundled(case)?;
    let params = PrivacyParams::new(epsilon, alpha, mechanism(mechanism_name)?).map_err(|e| e.to_string())?;
    let ranges = default_ranges(&model);
    let mut out: Vec<ScatterLoad> = model
        .loads()
        .iter()
        .map(|l| ScatterLoad { original: [l.demand.re, l.demand.im], samples: Vec::with_capacity(draws as usize) })
        .collect();
    for d in 0..draws as u64 {
        let noisy = obfuscate_all(&model, &params, Some(&ranges), seed.wrapping_add(d)).map_err(|e| e.to_string())?;
        for (slot, v) in out.iter_mut().zip(noisy.values()) {
            slot.samples.push([v.re, v.im]);
        }
    }
    Ok(to_json(&out))
}

#[derive(Serialize)]
struct Histogram {
    c: f64,
    center_probability: f64,
    left: f64,
    right: f64,
    edges: Vec<f64>,
    counts: Vec<u32>,
    mean: f64,
}

/// Histogram over `[-C, C]` of `draws` piecewise outputs for input `x`.
pub fn piecewise_histogram_json(x: f64, epsilon: f64, alpha: f64, draws: u32, bins: u32, seed: u64) -> Result<String, String> {
    let params = PrivacyParams::new(epsilon, alpha, Mechanism::Piecewise).map_err(|e| e.to_string())?;
    let k = PiecewiseConstants::new(&params);
    let bins = bins.max(1) as usize;
    let width = 2.0 * k.c / bins as f64;
    let mut counts = vec![0u32; bins];
    let mut rng = load_stream(seed, 0);
    let mut sum = 0.0;
    for _ in 0..draws {
        let y = piecewise_obfuscate(x, &params, &mut rng).map_err(|e| e.to_string())?;
        sum += y;
        let b = (((y + k.c) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let edges = (0..=bins).map(|b| -k.c + b as f64 * width).collect();
    Ok(to_json(&Histogram {
        c: k.c,
        center_probability: k.center_probability,
        left: k.left(x),
        right: k.right(x),
        edges,
        counts,
        mean: if draws > 0 { sum / draws as f64 } else { 0.0 },
    }))
}

#[derive(Serialize)]
struct Restoration {
    trace: Vec<(usize, f64, f64, f64, f64, bool)>,
    tilde: Vec<[f64; 2]>,
    hat: Vec<[f64; 2]>,
    original: Vec<[f64; 2]>,
    converged: bool,
    iterations: usize,
    percent_diff: f64,
    privacy_loss: f64,
}

/// Obfuscates a bundled case's loads with the Polar Laplace mechanism and
/// restores feasibility with ADMM.
pub fn restore_case_json(case: &str, epsilon: f64, alpha: f64, beta: f64, seed: u64, t_max: u32) -> Result<String, String> {
    let model = bundled(case)?;
    let params = PrivacyParams::new(epsilon, alpha, Mechanism::PolarLaplace).map_err(|e| e.to_string())?;
    let noisy = obfuscate_all(&model, &params, None, seed).map_err(|e| e.to_string())?;
    let cfg = AdmmConfig { beta, t_max: t_max.max(1) as usize, ..AdmmConfig::default() };
    let result = run_admm(&model, &noisy, &cfg).map_err(|e| e.to_string())?;
    let fidelity = fidelity_report(&model, &result.state.consensus.generator, beta).map_err(|e| e.to_string())?;
    let pairs = |v: &[privopf::ComplexQuantity]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
    Ok(to_json(&Restoration {
        trace: result
            .trace
            .records()
            .iter()
            .map(|r| (r.iter, r.eps_p, r.eps_d, r.rho, r.total_cost, r.boosting))
            .collect(),
        tilde: pairs(noisy.values()),
        hat: pairs(&result.hat_loads),
        original: model.loads().iter().map(|l| [l.demand.re, l.demand.im]).collect(),
        converged: result.converged,
        iterations: result.iterations_used,
        percent_diff: fidelity.percent_diff,
        privacy_loss: privacy_loss(&result.hat_loads, noisy.values()).map_err(|e| e.to_string())?,
    }))
}

#[wasm_bindgen]
pub fn obfuscation_scatter(
    case: &str,
    epsilon: f64,
    alpha: f64,
    mechanism: &str,
    draws: u32,
    seed: u64,
) -> Result<String, JsValue> {
    obfuscation_scatter_json(case, epsilon, alpha, mechanism, draws, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn piecewise_histogram(x: f64, epsilon: f64, alpha: f64, draws: u32, bins: u32, seed: u64) -> Result<String, JsValue> {
    piecewise_histogram_json(x, epsilon, alpha, draws, bins, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn restore_case(case: &str, epsilon: f64, alpha: f64, beta: f64, seed: u64, t_max: u32) -> Result<String, JsValue> {
    restore_case_json(case, epsilon, alpha, beta, seed, t_max).map_err(|e| JsValue::from_str(&e))
}
