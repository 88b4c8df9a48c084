//! Virtual tumour growth, stochastic nanoparticle transport and
//! evolutionary design of nanocarriers.
//!
//! The pipeline has four stages:
//!
//! 1. [`tumour`] grows a lattice tumour with vessels, oxygen, cancer cells and
//!    cancer stem cells;
//! 2. [`scenario`] measures penetration depth and cuts 1-D compartment chains
//!    out of the tumour;
//! 3. [`tissue`] simulates particle release, hopping, receptor binding,
//!    internalisation and threshold cell death along a chain;
//! 4. [`evolve`] searches particle and treatment parameters for maximal kill
//!    at minimal dose.
//!
//! [`dosimetry`] holds the closed-form dose arithmetic used by the last two.

pub mod dosimetry;
pub mod error;
pub mod evolve;
pub mod num;
pub mod scenario;
pub mod seed;
pub mod tissue;
pub mod tumour;

pub use error::{Error, Result};
pub use num::Real;

pub type DrugModel = dosimetry::DrugModel<f64>;
pub type HostModel = dosimetry::HostModel<f64>;
pub type PenetrationGeometry = dosimetry::PenetrationGeometry<f64>;
pub type NanoparticleDesign = dosimetry::NanoparticleDesign<f64>;
pub type Dosimetry = dosimetry::Dosimetry<f64>;
pub type DesignRanges = dosimetry::DesignRanges<f64>;
pub type OxygenField = tumour::oxygen::OxygenField<f64>;

pub type DrugModelF32 = dosimetry::DrugModel<f32>;
pub type DosimetryF32 = dosimetry::Dosimetry<f32>;
pub type OxygenFieldF32 = tumour::oxygen::OxygenField<f32>;
