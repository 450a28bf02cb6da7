use privopf_web::{obfuscation_scatter_json, piecewise_histogram_json, restore_case_json};
use serde_json::Value;

#[test]
fn scatter_has_one_series_per_load() {
    let v: Value = serde_json::from_str(&obfuscation_scatter_json("case9", 1.0, 0.1, "laplace", 20, 3).unwrap()).unwrap();
    let loads = v.as_array().unwrap();
    assert_eq!(loads.len(), 3);
    assert!(loads.iter().all(|l| l["samples"].as_array().unwrap().len() == 20));
    assert!(obfuscation_scatter_json("case9", 1.0, 0.1, "gaussian", 1, 0).is_err());
    assert!(obfuscation_scatter_json("case42", 1.0, 0.1, "laplace", 1, 0).is_err());
}

#[test]
fn histogram_counts_every_draw() {
    let v: Value = serde_json::from_str(&piecewise_histogram_json(0.3, 1.0, 0.25, 5000, 40, 1).unwrap()).unwrap();
    let total: u64 = v["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(total, 5000);
    assert_eq!(v["edges"].as_array().unwrap().len(), 41);
    assert!(piecewise_histogram_json(1.5, 1.0, 0.25, 10, 4, 1).is_err());
}

#[test]
fn restoration_converges_on_case3() {
    let v: Value = serde_json::from_str(&restore_case_json("case3", 1.0, 0.1, 0.1, 0, 5000).unwrap()).unwrap();
    assert_eq!(v["converged"], Value::Bool(true));
    assert_eq!(v["hat"].as_array().unwrap().len(), 3);
    assert!(v["percent_diff"].as_f64().unwrap().abs() <= 10.0);
}
