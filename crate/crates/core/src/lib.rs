//! Locally private release of power-network loads.
//!
//! Each load agent first perturbs its own demand with a local differential
//! privacy mechanism ([`privacy`]). Load, generator, line and bus agents then
//! run a component-based ADMM ([`admm`], [`agents`]) that moves the noisy loads
//! as little as possible while restoring AC power-flow feasibility and keeping
//! every generator's dispatch cost within a band around its public reference
//! cost. [`validation`] checks the outcome against the AC power-flow equations.

pub mod admm;
pub mod agents;
pub mod cases;
pub mod complex;
pub mod network;
pub mod privacy;
pub mod validation;

pub use complex::ComplexQuantity;
pub use network::{parse_case, NetworkModel};
pub use privacy::{obfuscate_all, Mechanism, ObfuscatedLoads, PrivacyParams};
