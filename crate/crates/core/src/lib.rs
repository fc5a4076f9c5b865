//! Frequency-domain noise model of a laser phase-noise stabilization loop
//! whose in-loop readout is enhanced by injected squeezed vacuum.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the scenario runner and the
//! command-line tool use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod budget;
pub mod error;
pub mod feedback;
pub mod noise;
pub mod optics;
pub mod scalar;
pub mod scenario;

pub use error::{Error, Result};
pub use scalar::Real;

pub type FrequencyGrid = noise::FrequencyGrid<f64>;
pub type Spectrum = noise::Spectrum<f64>;
pub type QuadratureVariances = noise::QuadratureVariances<f64>;
pub type CavityParams = optics::CavityParams<f64>;
pub type DetuningRegime = optics::DetuningRegime<f64>;
pub type BeamSplitter = optics::BeamSplitter<f64>;
pub type SqueezerParams = optics::SqueezerParams<f64>;
pub type DetectionParams = feedback::DetectionParams<f64>;
pub type ServoModel = feedback::ServoModel<f64>;
pub type NoiseFloors = feedback::NoiseFloors<f64>;
pub type BudgetEntry = budget::BudgetEntry<f64>;
pub type EnhancementLedger = budget::EnhancementLedger<f64>;
pub type NoiseBudget = budget::NoiseBudget<f64>;

pub use noise::SpectrumUnit;
