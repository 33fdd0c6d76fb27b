//! Simulation and analysis toolkit for single-photon quantum frequency
//! conversion in a nonlinear waveguide.
//!
//! * [`device_model`]: closed-form conversion efficiency, noise and
//!   correlation-degradation models.
//! * [`photon_sim`]: Monte Carlo detection-event streams for a heralded pair
//!   source or weak coherent pulses passing the converter chain.
//! * [`coincidence_analysis`]: coincidence counting, g⁽²⁾ estimators and
//!   μ₁ extraction.
//! * [`model_fit`]: least-squares recovery of device constants from sweeps.

pub mod coincidence_analysis;
pub mod device_model;
pub mod error;
pub mod model_fit;
pub mod photon_sim;
pub mod quadrature;

pub use error::{Error, Result};
