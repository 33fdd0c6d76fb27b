//! Monte Carlo detection-event generation for the pair source, weak
//! coherent pulses and the converter chain.
//!
//! Every operation is deterministic given its inputs and seed. Streams stay
//! time-ordered through every transformation.

pub mod chain;
mod events;
pub mod io;
mod rng;
mod source;
mod transforms;

pub use chain::{ArmSpec, Arms, ChainParams, ChainStreams};
pub use events::{Channel, DetectionEvent, EventStream, Origin};
pub use rng::{derive_seed, op_rng, SimRng};
pub use source::{
    simulate_pair_source, simulate_wcs, DetectorParams, SourceParams, WcsParams,
    GAUSSIAN_FWHM_PER_SIGMA,
};
pub use transforms::{
    apply_detector, apply_frequency_beamsplitter, apply_loss, inject_conversion_noise,
    poisson_process, select_correlated_mode, NoiseBranch,
};
