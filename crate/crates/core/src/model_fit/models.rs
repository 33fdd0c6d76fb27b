use super::dataset::Dataset;
use super::lm::{levenberg_marquardt, FitResult, LmOptions, Model};
use crate::device_model::{backconverted_noise_rate, telecom_noise_rate, WaveguideParams};
use crate::error::{Error, Result};
use crate::photon_sim::NoiseBranch;

/// `η(P) = η_max·sin²(L·√(η_n·P))` with P in W, parameters `[η_max, η_n]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyModel {
    pub length_cm: f64,
}

impl Model for EfficiencyModel {
    fn parameter_names(&self) -> &[&'static str] {
        &["eta_max", "eta_n"]
    }

    fn parameter_units(&self) -> &[&'static str] {
        &["", "1/(W cm^2)"]
    }

    fn value(&self, x: f64, p: &[f64]) -> f64 {
        let u = self.length_cm * (p[1] * x).sqrt();
        p[0] * u.sin().powi(2)
    }

    fn gradient(&self, x: f64, p: &[f64], grad: &mut [f64]) {
        let u = self.length_cm * (p[1] * x).sqrt();
        grad[0] = u.sin().powi(2);
        // dη/dη_n = η_max·sin(2u)·u/(2η_n)
        grad[1] = if u == 0.0 {
            0.0
        } else {
            p[0] * (2.0 * u).sin() * u / (2.0 * p[1])
        };
    }
}

/// Default starting point: η_max from the largest efficiency, η_n from the
/// small-angle form η ≈ η_max·η_n·L²·P over the first quarter of the sweep.
pub fn default_efficiency_init(data: &Dataset, length_cm: f64) -> Result<[f64; 2]> {
    let eta_max = data
        .points()
        .iter()
        .map(|p| p.y)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut pts: Vec<_> = data
        .points()
        .iter()
        .filter(|p| p.x > 0.0)
        .map(|p| (p.x, p.y))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pts.is_empty() || eta_max <= 0.0 {
        return Err(Error::Identifiability(
            "efficiency data has no point with P > 0 and η > 0".into(),
        ));
    }
    let quarter = &pts[..(pts.len() / 4).max(2).min(pts.len())];
    let sxx: f64 = quarter.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = quarter.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    if !(slope.is_finite() && slope > 0.0) {
        return Err(Error::Identifiability(
            "no efficiency rise at low pump power".into(),
        ));
    }
    Ok([eta_max, slope / (eta_max * length_cm * length_cm)])
}

/// Fits `[η_max, η_n]` of the efficiency curve to (P in W, η) data.
pub fn fit_efficiency_curve(
    data: &Dataset,
    length_cm: f64,
    init: Option<[f64; 2]>,
) -> Result<FitResult> {
    if !(length_cm.is_finite() && length_cm > 0.0) {
        return Err(Error::Domain {
            name: "length",
            value: length_cm,
            reason: "must be > 0",
        });
    }
    if data.points().iter().all(|p| p.x == 0.0) {
        return Err(Error::Identifiability("all pump powers are zero".into()));
    }
    let init = match init {
        Some(i) => i,
        None => default_efficiency_init(data, length_cm)?,
    };
    if !(init[1].is_finite() && init[1] > 0.0) {
        return Err(Error::Argument(format!(
            "initial eta_n = {} must be > 0",
            init[1]
        )));
    }
    let max_phase = data
        .points()
        .iter()
        .map(|p| length_cm * (init[1] * p.x.max(0.0)).sqrt())
        .fold(0.0, f64::max);
    if max_phase <= 0.5 {
        return Err(Error::Identifiability(format!(
            "largest phase L·√(η_n·P) = {max_phase:.3} rad at the initial guess; the sweep is too short to separate η_max and η_n"
        )));
    }
    let model = EfficiencyModel { length_cm };
    let phase = |eta_n: f64| {
        data.points()
            .iter()
            .map(|p| length_cm * (eta_n.max(0.0) * p.x.max(0.0)).sqrt())
            .fold(0.0, f64::max)
    };
    let degenerate = |reached: f64| {
        Error::Identifiability(format!(
            "fitted phase reaches only {reached:.3} rad; only the product η_max·η_n is determined"
        ))
    };
    let fit = match levenberg_marquardt(&model, data, &init, &LmOptions::default()) {
        Err(Error::NotConverged { best, .. }) if phase(best[1]) <= 0.5 => {
            return Err(degenerate(phase(best[1])))
        }
        other => other?,
    };
    if phase(fit.parameters[1]) <= 0.5 {
        return Err(degenerate(phase(fit.parameters[1])));
    }
    Ok(fit)
}

/// Slope estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseCoefficient {
    /// Counts s⁻¹ mW⁻¹ cm⁻¹ per THz.
    pub alpha_n: f64,
    pub std_error: f64,
}

/// Linear slope through the origin of the first `k_points` of (P in mW,
/// counts/s in `bandwidth_ghz`) data, normalized to the noise coefficient
/// per cm of waveguide and THz of bandwidth.
pub fn fit_noise_slope(
    data: &Dataset,
    k_points: usize,
    length_cm: f64,
    bandwidth_ghz: f64,
) -> Result<NoiseCoefficient> {
    if k_points < 2 || k_points > data.len() {
        return Err(Error::Argument(format!(
            "k_points = {k_points} must lie in 2..={}",
            data.len()
        )));
    }
    if !(length_cm > 0.0 && bandwidth_ghz > 0.0) {
        return Err(Error::Argument("length and bandwidth must be > 0".into()));
    }
    let pts = &data.points()[..k_points];
    if pts.windows(2).any(|w| w[1].x < w[0].x) {
        return Err(Error::Argument("data must be sorted by pump power".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|p| (p.x, p.y)).unzip();
    let weights: Vec<f64> = data.weights()[..k_points].to_vec();
    let fit = projection(&xs, &ys, &weights, data.has_sigmas())?;
    let norm = length_cm * bandwidth_ghz / 1e3;
    Ok(NoiseCoefficient {
        alpha_n: fit.0 / norm,
        std_error: fit.1 / norm,
    })
}

/// Model noise rate of `branch` per unit α_N in `bandwidth_ghz`, P in mW.
fn unit_noise_shape(
    branch: NoiseBranch,
    pump_mw: f64,
    wg: &WaveguideParams,
    bandwidth_ghz: f64,
) -> Result<f64> {
    let unit = WaveguideParams {
        alpha_n: 1.0,
        ..*wg
    };
    let p = pump_mw * 1e-3;
    let rate = match branch {
        NoiseBranch::Converted => telecom_noise_rate(p, &unit)?,
        NoiseBranch::Unconverted => backconverted_noise_rate(p, &unit)?,
    };
    Ok(rate * bandwidth_ghz)
}

/// α_N of the full noise model with the efficiency constants of `wg` held
/// fixed. The model is linear in α_N, so the fit is a weighted projection.
pub fn fit_noise_model(
    data: &Dataset,
    wg: &WaveguideParams,
    branch: NoiseBranch,
    bandwidth_ghz: f64,
) -> Result<NoiseCoefficient> {
    if !(bandwidth_ghz.is_finite() && bandwidth_ghz > 0.0) {
        return Err(Error::Argument("bandwidth must be > 0".into()));
    }
    let shape = data
        .points()
        .iter()
        .map(|p| unit_noise_shape(branch, p.x, wg, bandwidth_ghz))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = data.points().iter().map(|p| p.y).collect();
    let (alpha_n, std_error) = projection(&shape, &ys, &data.weights(), data.has_sigmas())?;
    Ok(NoiseCoefficient { alpha_n, std_error })
}

/// Model noise rate in `bandwidth_ghz` at `pump_mw` for a given α_N.
pub fn noise_model_rate(
    branch: NoiseBranch,
    pump_mw: f64,
    wg: &WaveguideParams,
    bandwidth_ghz: f64,
) -> Result<f64> {
    Ok(wg.alpha_n * unit_noise_shape(branch, pump_mw, wg, bandwidth_ghz)?)
}

/// Weighted least squares of `y = a·g` returning `(a, σ_a)`.
fn projection(g: &[f64], y: &[f64], w: &[f64], absolute_sigma: bool) -> Result<(f64, f64)> {
    let sgg: f64 = g.iter().zip(w).map(|(g, w)| (w * g).powi(2)).sum();
    if sgg == 0.0 {
        return Err(Error::Identifiability(
            "model is zero at every point".into(),
        ));
    }
    let sgy: f64 = g
        .iter()
        .zip(y)
        .zip(w)
        .map(|((g, y), w)| w * w * g * y)
        .sum();
    let a = sgy / sgg;
    let se = if absolute_sigma {
        1.0 / sgg.sqrt()
    } else if g.len() > 1 {
        let rss: f64 = g.iter().zip(y).map(|(g, y)| (y - a * g).powi(2)).sum();
        (rss / (g.len() - 1) as f64 / sgg).sqrt()
    } else {
        0.0
    };
    Ok((a, se))
}
