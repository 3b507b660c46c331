//! Simulation and structural analysis of R&D-driven growth when technologies
//! exchange knowledge spillovers through an arbitrary spillover matrix.

pub mod allocation;
pub mod dynamics;
pub mod error;
pub mod longrun;
pub mod model;
pub mod report;
pub mod scenario;
pub mod spectral;
pub mod structure;

pub use error::{Error, ErrorKind, Result};
pub use model::{validate_model, EconomyParams, Model, QualityState, SpilloverMatrix};
