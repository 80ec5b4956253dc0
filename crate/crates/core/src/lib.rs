//! Residue functions, adjoint ideals and lc-measures for toric snc model data
//! on the unit polydisc.

pub mod error;
pub mod extension_engine;
pub mod ideal_engine;
pub mod presets;
pub mod quadrature;
pub mod rational;
pub mod residue_analysis;
pub mod suites;
pub mod toric_model;

pub use error::{Error, Result};
pub use rational::Q;
