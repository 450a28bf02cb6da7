//! Privacy phase: each load agent independently obfuscates its own demand.
//!
//! Two mechanisms are available. Polar Laplace perturbs the complex load with
//! planar noise (one draw per load). The piecewise mechanism acts on scalars,
//! so active and reactive parts are normalized and perturbed separately.
//!
//! Randomness comes from ChaCha8 streams: load `k` under seed `s` always uses
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`. Results therefore do
//! not depend on the order (or thread) in which loads are processed.

mod lambert;
mod laplace;
mod piecewise;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lambert::lambert_w_minus1;
pub use laplace::{planar_laplace_radius, polar_laplace_obfuscate};
pub use piecewise::{denormalize, normalize, piecewise_obfuscate, PiecewiseConstants};

use crate::complex::ComplexQuantity;
use crate::network::NetworkModel;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("Lambert W₋₁ is undefined at {0}")]
    DomainError(f64),
    #[error("piecewise input {0} is outside [-1, 1]")]
    InputOutOfRange(f64),
    #[error("invalid privacy parameters: {0}")]
    InvalidParams(String),
    #[error("invalid load range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error("expected {expected} load ranges, got {found}")]
    RangeCountMismatch { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    PolarLaplace,
    Piecewise,
}

impl Mechanism {
    /// How noise is drawn for a complex load.
    pub fn noise_shape(self) -> &'static str {
        match self {
            Mechanism::PolarLaplace => "planar",
            Mechanism::Piecewise => "per_component",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Indistinguishability distance, per-unit.
    pub alpha: f64,
    pub mechanism: Mechanism,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, alpha: f64, mechanism: Mechanism) -> Result<Self, PrivacyError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(PrivacyError::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(PrivacyError::InvalidParams(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { epsilon, alpha, mechanism })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentRange {
    pub lower: f64,
    pub upper: f64,
}

impl ComponentRange {
    pub fn new(lower: f64, upper: f64) -> Result<Self, PrivacyError> {
        if !(lower < upper && lower.is_finite() && upper.is_finite()) {
            return Err(PrivacyError::InvalidRange(lower, upper));
        }
        Ok(Self { lower, upper })
    }
}

/// Public normalization range of one load's active and reactive parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRange {
    pub active: ComponentRange,
    pub reactive: ComponentRange,
}

/// Default ranges: `[0, 2·max]` of each component over all loads, widened to
/// include `2·min` when some component is negative.
pub fn default_ranges(model: &NetworkModel) -> Vec<LoadRange> {
    let span = |values: Vec<f64>| {
        let hi = values.iter().fold(0.0f64, |m, &v| m.max(2.0 * v));
        let lo = values.iter().fold(0.0f64, |m, &v| m.min(2.0 * v));
        let hi = if hi > lo { hi } else { lo + 1.0 };
        ComponentRange { lower: lo, upper: hi }
    };
    let active = span(model.loads().iter().map(|l| l.demand.re).collect());
    let reactive = span(model.loads().iter().map(|l| l.demand.im).collect());
    vec![LoadRange { active, reactive }; model.loads().len()]
}

/// Output of the privacy phase. The fidelity phase sees loads only through
/// this type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObfuscatedLoads {
    values: Vec<ComplexQuantity>,
    params: PrivacyParams,
    seed: u64,
}

impl ObfuscatedLoads {
    pub fn new(values: Vec<ComplexQuantity>, params: PrivacyParams, seed: u64) -> Self {
        Self { values, params, seed }
    }

    pub fn values(&self) -> &[ComplexQuantity] {
        &self.values
    }

    pub fn params(&self) -> &PrivacyParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `load_index,p_tilde,q_tilde` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["load_index", "p_tilde", "q_tilde"])?;
        for (k, v) in self.values.iter().enumerate() {
            writer.serialize((k, v.re, v.im))?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Random stream owned by load `index` under `seed`.
pub fn load_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Obfuscates a single load with the configured mechanism.
pub fn obfuscate_load<R: Rng + ?Sized>(
    demand: ComplexQuantity,
    params: &PrivacyParams,
    range: Option<&LoadRange>,
    rng: &mut R,
) -> Result<ComplexQuantity, PrivacyError> {
    match params.mechanism {
        Mechanism::PolarLaplace => Ok(polar_laplace_obfuscate(demand, params, rng)),
        Mechanism::Piecewise => {
            let range = range.ok_or_else(|| PrivacyError::InvalidParams("piecewise mechanism needs load ranges".into()))?;
            let mut component = |x: f64, r: &ComponentRange| -> Result<f64, PrivacyError> {
                let y = normalize(x, r);
                Ok(denormalize(piecewise_obfuscate(y, params, rng)?, r))
            };
            let re = component(demand.re, &range.active)?;
            let im = component(demand.im, &range.reactive)?;
            Ok(ComplexQuantity::new(re, im))
        }
    }
}

/// Runs the privacy phase for every load, each on its own random stream.
pub fn obfuscate_all(
    model: &NetworkModel,
    params: &PrivacyParams,
    ranges: Option<&[LoadRange]>,
    seed: u64,
) -> Result<ObfuscatedLoads, PrivacyError> {
    obfuscate_all_with(model, params, ranges, seed, |k| load_stream(seed, k))
}

/// [`obfuscate_all`] with a caller-supplied stream per load index.
pub fn obfuscate_all_with<R, F>(
    model: &NetworkModel,
    params: &PrivacyParams,
    ranges: Option<&[LoadRange]>,
    seed: u64,
    stream: F,
) -> Result<ObfuscatedLoads, PrivacyError>
where
    R: Rng,
    F: Fn(usize) -> R,
{
    let loads = model.loads();
    if let Some(ranges) = ranges {
        if ranges.len() != loads.len() {
            return Err(PrivacyError::RangeCountMismatch { expected: loads.len(), found: ranges.len() });
        }
    }
    let values = loads
        .iter()
        .enumerate()
        .map(|(k, load)| {
            let mut rng = stream(k);
            obfuscate_load(load.demand, params, ranges.map(|r| &r[k]), &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ObfuscatedLoads { values, params: *params, seed })
}
