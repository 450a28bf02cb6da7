//! Small bundled networks with reference dispatches and the matching voltage
//! profiles (`bus_index,vm,va`) of those dispatches.

pub const CASE3: &str = include_str!("../cases/case3.m");
pub const CASE3_REF: &str = include_str!("../cases/case3_ref.csv");
pub const CASE3_VOLTAGES: &str = include_str!("../cases/case3_voltages.csv");

pub const CASE5: &str = include_str!("../cases/case5.m");
pub const CASE5_REF: &str = include_str!("../cases/case5_ref.csv");
pub const CASE5_VOLTAGES: &str = include_str!("../cases/case5_voltages.csv");

pub const CASE9: &str = include_str!("../cases/case9.m");
pub const CASE9_REF: &str = include_str!("../cases/case9_ref.csv");
pub const CASE9_VOLTAGES: &str = include_str!("../cases/case9_voltages.csv");

/// `(name, case text, reference dispatch csv)` for every bundled network.
pub const ALL: [(&str, &str, &str); 3] = [
    ("case3", CASE3, CASE3_REF),
    ("case5", CASE5, CASE5_REF),
    ("case9", CASE9, CASE9_REF),
];

/// Parses a `bus_index,vm,va` profile into `(magnitude, angle)` pairs.
pub fn parse_voltage_profile(text: &str) -> Vec<(f64, f64)> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<f64> = l.split(',').map(|c| c.trim().parse().expect("numeric voltage profile")).collect();
            (cols[1], cols[2])
        })
        .collect()
}
