//! Thermometry with continuously monitored N-level probes.
//!
//! The crate computes Fisher-information rates of jump processes driven by
//! fermionic or bosonic baths, optimizes probe spectra, simulates monitored
//! trajectories and estimates temperature from them.

pub mod bath;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod fisher;
pub mod optimize;
pub mod robustness;
pub mod spectrum;
pub mod stats;
pub mod trajectory;

pub use bath::{BathModel, GeneratorMatrix};
pub use error::{Error, Result};
pub use fisher::{FiRate, Variant};
pub use optimize::{Maximum, OptimizationResult};
pub use spectrum::{EnergySpectrum, TwoLevelAnsatz};
