//! Estimators over detection-event streams: windowed coincidences,
//! normalized cross-correlations, heralded autocorrelation with its
//! triple-coincidence histogram, and μ₁ extraction from pulsed data.

mod coincidences;
mod g2;
mod heralded;
mod mu1;
mod sweep;

pub use coincidences::{count_coincidences, CoincidenceWindow};
pub use g2::{
    cross_counts, g2_cross, g2_cross_with, CrossCounts, G2Options, G2Result, Normalization,
    WindowConvention,
};
pub use heralded::{
    heralded_counts, heralded_g2, HeraldedCounts, HeraldedG2, TripleHistogram, HISTOGRAM_DEPTH,
};
pub use mu1::{extract_mu1, measure_pulsed_snr, Mu1Estimate, SnrMeasurement};
pub use sweep::{
    g2_sweep_point, g2_vs_pump_sweep, heralded_g2_point, sweep_point_seed, wcs_mu1_point, Mu1Point,
    SweepRow, SweepSettings,
};
