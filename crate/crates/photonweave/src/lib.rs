//! Multi-photon interference for partially distinguishable photons, checked against a
//! first-quantization oracle, plus tight-binding photonic lattices with topological
//! zero modes.

#[cfg(feature = "cli")]
pub mod cli;
pub mod engine;
pub mod interferometers;
pub mod lattice;
pub mod error;
pub mod experiments;
pub mod numerics;
pub mod oracle;
pub mod states;

pub use error::{Error, Result};
