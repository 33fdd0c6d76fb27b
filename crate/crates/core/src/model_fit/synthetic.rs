use rand_distr::{Distribution, Normal, Poisson};

use super::dataset::{DataPoint, Dataset};
use super::models::noise_model_rate;
use crate::device_model::{internal_efficiency, WaveguideParams};
use crate::error::{Error, Result};
use crate::photon_sim::{op_rng, NoiseBranch};

/// Internal efficiency at `points` pump powers evenly spaced over
/// `[0, pump_max_w]`, each multiplied by `1 + relative_noise·N(0, 1)`.
pub fn synthetic_efficiency_data(
    wg: &WaveguideParams,
    pump_max_w: f64,
    points: usize,
    relative_noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if points < 2 {
        return Err(Error::Argument(format!("need >= 2 points, got {points}")));
    }
    if !(pump_max_w.is_finite() && pump_max_w > 0.0) {
        return Err(Error::Domain {
            name: "pump_max",
            value: pump_max_w,
            reason: "must be > 0",
        });
    }
    if !(relative_noise.is_finite() && relative_noise >= 0.0) {
        return Err(Error::Domain {
            name: "relative_noise",
            value: relative_noise,
            reason: "must be >= 0",
        });
    }
    let mut rng = op_rng(seed, "synthetic_efficiency");
    let gauss = Normal::new(0.0, 1.0).expect("unit normal");
    let pts = (0..points)
        .map(|i| {
            let p = pump_max_w * i as f64 / (points - 1) as f64;
            let y = internal_efficiency(p, wg)?;
            Ok(DataPoint {
                x: p,
                y: y * (1.0 + relative_noise * gauss.sample(&mut rng)),
                sigma: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(pts)
}

/// Pump-only noise count rates in `bandwidth_ghz`, counted for
/// `counting_time_s` at each pump power (mW). Each rate carries its Poisson
/// standard error; an empty count is given the error of one count.
pub fn synthetic_noise_data(
    wg: &WaveguideParams,
    branch: NoiseBranch,
    bandwidth_ghz: f64,
    pumps_mw: &[f64],
    counting_time_s: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(counting_time_s.is_finite() && counting_time_s > 0.0) {
        return Err(Error::Domain {
            name: "counting_time",
            value: counting_time_s,
            reason: "must be > 0",
        });
    }
    let mut rng = op_rng(seed, "synthetic_noise");
    let pts = pumps_mw
        .iter()
        .map(|&p| {
            let mean = noise_model_rate(branch, p, wg, bandwidth_ghz)? * counting_time_s;
            let n = if mean > 0.0 {
                Poisson::new(mean).expect("positive mean").sample(&mut rng)
            } else {
                0.0
            };
            Ok(DataPoint {
                x: p,
                y: n / counting_time_s,
                sigma: Some(n.max(1.0).sqrt() / counting_time_s),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_fit::{fit_efficiency_curve, fit_noise_model};

    #[test]
    fn noiseless_efficiency_matches_model() {
        let wg = WaveguideParams::nominal();
        let d = synthetic_efficiency_data(&wg, 0.53, 25, 0.0, 1).unwrap();
        assert_eq!(d.len(), 25);
        assert_eq!(d.points()[24].x, 0.53);
        for p in d.points() {
            assert_eq!(p.y, internal_efficiency(p.x, &wg).unwrap());
        }
    }

    #[test]
    fn efficiency_noise_is_relative() {
        let wg = WaveguideParams::nominal();
        let d = synthetic_efficiency_data(&wg, 0.53, 400, 0.01, 2).unwrap();
        let rel: Vec<f64> = d.points()[1..]
            .iter()
            .map(|p| p.y / internal_efficiency(p.x, &wg).unwrap() - 1.0)
            .collect();
        let n = rel.len() as f64;
        let mean = rel.iter().sum::<f64>() / n;
        let sd = (rel.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!(
            mean.abs() < 0.002 && (sd - 0.01).abs() < 0.001,
            "{mean} {sd}"
        );
        assert_eq!(d.points()[0].y, 0.0);
        let again = synthetic_efficiency_data(&wg, 0.53, 400, 0.01, 2).unwrap();
        assert_eq!(d, again);
        let fit = fit_efficiency_curve(&d, wg.length_cm, None).unwrap();
        assert!((fit.parameters[0] - 0.95).abs() < 0.02);
    }

    #[test]
    fn noise_counts_recover_coefficient() {
        let wg = WaveguideParams::nominal();
        let pumps = [50.0, 100.0, 200.0, 300.0, 530.0];
        let d = synthetic_noise_data(&wg, NoiseBranch::Converted, 0.21, &pumps, 10.0, 3).unwrap();
        assert!(d.has_sigmas());
        let fit = fit_noise_model(&d, &wg, NoiseBranch::Converted, 0.21).unwrap();
        assert!(
            (fit.alpha_n - 76_000.0).abs() < 4.0 * fit.std_error,
            "{fit:?}"
        );
        assert!(fit.std_error / fit.alpha_n < 0.01);
    }

    #[test]
    fn invalid_inputs() {
        let wg = WaveguideParams::nominal();
        assert!(synthetic_efficiency_data(&wg, 0.53, 1, 0.0, 0).is_err());
        assert!(synthetic_efficiency_data(&wg, 0.0, 5, 0.0, 0).is_err());
        assert!(synthetic_efficiency_data(&wg, 0.5, 5, -0.1, 0).is_err());
        assert!(synthetic_noise_data(&wg, NoiseBranch::Converted, 0.21, &[1.0], 0.0, 0).is_err());
        let zero =
            synthetic_noise_data(&wg, NoiseBranch::Unconverted, 10.0, &[0.0], 1.0, 0).unwrap();
        assert_eq!(zero.points()[0].y, 0.0);
        assert_eq!(zero.points()[0].sigma, Some(1.0));
    }
}
