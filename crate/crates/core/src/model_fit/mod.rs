//! Least-squares recovery of device constants from sweep data: a damped
//! Gauss–Newton solver for the efficiency curve and closed-form fits of the
//! noise coefficient.

mod dataset;
mod lm;
mod models;
mod synthetic;

pub use dataset::{DataPoint, Dataset};
pub use lm::{jacobian_check, levenberg_marquardt, FitResult, LinearModel, LmOptions, Model};
pub use models::{
    default_efficiency_init, fit_efficiency_curve, fit_noise_model, fit_noise_slope,
    noise_model_rate, EfficiencyModel, NoiseCoefficient,
};
pub use synthetic::{synthetic_efficiency_data, synthetic_noise_data};
