//! Closed-form physics of the waveguide frequency converter.
//!
//! Units: pump powers in watts, waveguide lengths in cm, times in seconds,
//! bandwidths in GHz. Noise rates are counts per second per GHz of optical
//! bandwidth at the waveguide output.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature;

const NOISE_QUAD_REL_TOL: f64 = 1e-13;

/// Wavelengths of the three fields taking part in difference frequency
/// generation, in nm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    pub signal_nm: f64,
    pub converted_nm: f64,
    pub pump_nm: f64,
}

impl ChannelSpec {
    pub fn nominal() -> Self {
        Self {
            signal_nm: 606.0,
            converted_nm: 1552.0,
            pump_nm: 994.0,
        }
    }

    /// Converted wavelength fixed by energy conservation.
    pub fn converted_from(signal_nm: f64, pump_nm: f64) -> Result<Self> {
        let inv = 1.0 / signal_nm - 1.0 / pump_nm;
        if !(signal_nm > 0.0 && pump_nm > 0.0 && inv > 0.0) {
            return Err(Error::InvalidParams {
                what: "ChannelSpec",
                reason: format!(
                    "no positive difference frequency for {signal_nm} nm - {pump_nm} nm"
                ),
            });
        }
        let spec = Self {
            signal_nm,
            converted_nm: 1.0 / inv,
            pump_nm,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.signal_nm, self.converted_nm, self.pump_nm];
        if all.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParams {
                what: "ChannelSpec",
                reason: "wavelengths must be strictly positive".into(),
            });
        }
        let expected = 1.0 / self.signal_nm - 1.0 / self.pump_nm;
        let actual = 1.0 / self.converted_nm;
        if ((actual - expected) / expected).abs() > 1e-3 {
            return Err(Error::InvalidParams {
                what: "ChannelSpec",
                reason: format!(
                    "1/{} nm differs from 1/{} nm - 1/{} nm by more than 0.1%",
                    self.converted_nm, self.signal_nm, self.pump_nm
                ),
            });
        }
        Ok(())
    }
}

/// Waveguide constants entering the efficiency and noise models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideParams {
    /// Interaction length, cm.
    pub length_cm: f64,
    /// Peak internal conversion efficiency.
    pub eta_max: f64,
    /// Normalized efficiency, W⁻¹ cm⁻².
    pub eta_n: f64,
    /// Noise generation coefficient, counts s⁻¹ mW⁻¹ cm⁻¹ per THz.
    pub alpha_n: f64,
}

impl WaveguideParams {
    /// 1.4 cm PPLN ridge waveguide with the fitted constants.
    pub fn nominal() -> Self {
        Self {
            length_cm: 1.4,
            eta_max: 0.95,
            eta_n: 0.861,
            alpha_n: 76_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::InvalidParams {
                what: "WaveguideParams",
                reason: reason.into(),
            })
        };
        if !(self.length_cm.is_finite() && self.length_cm > 0.0) {
            return bad("length must be > 0");
        }
        if !(0.0..=1.0).contains(&self.eta_max) {
            return bad("eta_max must lie in [0, 1]");
        }
        if !(self.eta_n.is_finite() && self.eta_n > 0.0) {
            return bad("eta_n must be > 0");
        }
        if !(self.alpha_n.is_finite() && self.alpha_n >= 0.0) {
            return bad("alpha_n must be >= 0");
        }
        Ok(())
    }

    /// Phase-matching wavenumber √(η_n P) in cm⁻¹.
    fn wavenumber(&self, pump_w: f64) -> f64 {
        (self.eta_n * pump_w).sqrt()
    }

    /// Pump power of the first efficiency maximum, W.
    pub fn first_maximum_power(&self) -> f64 {
        (PI / (2.0 * self.length_cm)).powi(2) / self.eta_n
    }

    /// Linear noise rate α_N·P·L with no back-conversion, per GHz.
    pub fn linear_noise_rate(&self, pump_w: f64) -> f64 {
        noise_prefactor(self.alpha_n, pump_w) * self.length_cm
    }
}

/// Transmission factors between the device input and the output fiber.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    pub signal_transmission: f64,
    pub waveguide_coupling: f64,
    pub filter_transmission: f64,
    pub fiber_coupling: f64,
}

impl LossBudget {
    pub fn nominal() -> Self {
        Self {
            signal_transmission: 0.93,
            waveguide_coupling: 0.57,
            filter_transmission: 0.62,
            fiber_coupling: 0.79,
        }
    }

    pub fn lossless() -> Self {
        Self {
            signal_transmission: 1.0,
            waveguide_coupling: 1.0,
            filter_transmission: 1.0,
            fiber_coupling: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("signal_transmission", self.signal_transmission),
            ("waveguide_coupling", self.waveguide_coupling),
            ("filter_transmission", self.filter_transmission),
            ("fiber_coupling", self.fiber_coupling),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParams {
                    what: "LossBudget",
                    reason: format!("{name} = {v} must lie in (0, 1]"),
                });
            }
        }
        Ok(())
    }

    /// Transmission from the device input to the waveguide interior.
    pub fn input_transmission(&self) -> f64 {
        self.signal_transmission * self.waveguide_coupling
    }

    /// Transmission from the waveguide output to the output fiber.
    pub fn output_transmission(&self) -> f64 {
        self.filter_transmission * self.fiber_coupling
    }

    pub fn total(&self) -> f64 {
        self.input_transmission() * self.output_transmission()
    }
}

/// A single effective passband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub bandwidth_ghz: f64,
    pub transmission: f64,
}

impl FilterSpec {
    /// 210 MHz etalon in the converted arm.
    pub fn converted_etalon() -> Self {
        Self {
            bandwidth_ghz: 0.21,
            transmission: 0.95,
        }
    }

    /// 10 GHz etalon in the unconverted arm.
    pub fn unconverted_etalon() -> Self {
        Self {
            bandwidth_ghz: 10.0,
            transmission: 0.90,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_ghz.is_finite() && self.bandwidth_ghz > 0.0) {
            return Err(Error::InvalidParams {
                what: "FilterSpec",
                reason: "bandwidth must be > 0".into(),
            });
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(Error::InvalidParams {
                what: "FilterSpec",
                reason: "transmission must lie in (0, 1]".into(),
            });
        }
        Ok(())
    }
}

/// Fiber Bragg grating in front of the converted-arm etalon.
pub const CONVERTED_BRAGG_TRANSMISSION: f64 = 0.65;

/// α_N·P in counts s⁻¹ cm⁻¹ GHz⁻¹. α_N is quoted per mW and per THz, so
/// the mW→W and THz→GHz factors of 1000 cancel.
fn noise_prefactor(alpha_n: f64, pump_w: f64) -> f64 {
    (alpha_n / 1e3) * (pump_w * 1e3)
}

fn check_pump(pump_w: f64) -> Result<()> {
    if pump_w.is_finite() && pump_w >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "pump_power",
            value: pump_w,
            reason: "must be finite and >= 0",
        })
    }
}

/// Internal conversion efficiency η_max·sin²(L·√(η_n·P)).
pub fn internal_efficiency(pump_w: f64, wg: &WaveguideParams) -> Result<f64> {
    check_pump(pump_w)?;
    wg.validate()?;
    Ok(wg.eta_max * (wg.length_cm * wg.wavenumber(pump_w)).sin().powi(2))
}

/// Internal efficiency times every factor of the loss budget.
pub fn device_efficiency(pump_w: f64, wg: &WaveguideParams, losses: &LossBudget) -> Result<f64> {
    losses.validate()?;
    Ok(internal_efficiency(pump_w, wg)? * losses.total())
}

/// Integral over the generation point x of a noise photon surviving (or
/// undergoing) back-conversion along the remaining length L − x.
fn noise_integral(pump_w: f64, wg: &WaveguideParams, surviving: bool) -> Result<f64> {
    let k = wg.wavenumber(pump_w);
    let l = wg.length_cm;
    let converted = move |x: f64| wg.eta_max * ((l - x) * k).sin().powi(2);
    let q = if surviving {
        quadrature::integrate(|x| 1.0 - converted(x), 0.0, l, NOISE_QUAD_REL_TOL, 0.0)?
    } else {
        quadrature::integrate(converted, 0.0, l, NOISE_QUAD_REL_TOL, 1e-300)?
    };
    Ok(q.integral)
}

/// SPDC noise leaving the waveguide in the converted (telecom) band,
/// counts s⁻¹ GHz⁻¹.
pub fn telecom_noise_rate(pump_w: f64, wg: &WaveguideParams) -> Result<f64> {
    check_pump(pump_w)?;
    wg.validate()?;
    if pump_w == 0.0 {
        return Ok(0.0);
    }
    let integral = noise_integral(pump_w, wg, true)?;
    Ok(noise_prefactor(wg.alpha_n, pump_w) * integral)
}

/// Part of the SPDC noise that is converted back to the signal band,
/// counts s⁻¹ GHz⁻¹.
pub fn backconverted_noise_rate(pump_w: f64, wg: &WaveguideParams) -> Result<f64> {
    check_pump(pump_w)?;
    wg.validate()?;
    if pump_w == 0.0 || wg.eta_max == 0.0 {
        return Ok(0.0);
    }
    let integral = noise_integral(pump_w, wg, false)?;
    Ok(noise_prefactor(wg.alpha_n, pump_w) * integral)
}

/// Mean input photon number per detection window that gives unit
/// signal-to-noise ratio after the converter.
///
/// Noise is flat across the filter passband. It passes the filter and the
/// fiber coupling; the signal sees the whole loss budget. Detector
/// efficiency is common to both and drops out.
pub fn mu1_model(
    pump_w: f64,
    wg: &WaveguideParams,
    losses: &LossBudget,
    filter: &FilterSpec,
    extra_filter_transmission: f64,
    window_s: f64,
) -> Result<f64> {
    filter.validate()?;
    if !(extra_filter_transmission > 0.0 && extra_filter_transmission <= 1.0) {
        return Err(Error::Domain {
            name: "extra_filter_transmission",
            value: extra_filter_transmission,
            reason: "must lie in (0, 1]",
        });
    }
    if !(window_s.is_finite() && window_s > 0.0) {
        return Err(Error::Domain {
            name: "window",
            value: window_s,
            reason: "must be > 0",
        });
    }
    let efficiency = device_efficiency(pump_w, wg, losses)?;
    if efficiency <= 0.0 {
        return Err(Error::Singular(format!(
            "device efficiency vanishes at P = {pump_w} W, mu1 is undefined"
        )));
    }
    let noise_per_window = telecom_noise_rate(pump_w, wg)?
        * filter.bandwidth_ghz
        * filter.transmission
        * extra_filter_transmission
        * losses.fiber_coupling
        * window_s;
    Ok(noise_per_window / efficiency)
}

/// Signal-to-noise ratio of the converted light for a given input photon
/// number per window.
#[allow(clippy::too_many_arguments)]
pub fn snr(
    mean_input_photons: f64,
    pump_w: f64,
    wg: &WaveguideParams,
    losses: &LossBudget,
    filter: &FilterSpec,
    extra_filter_transmission: f64,
    window_s: f64,
) -> Result<f64> {
    if !(mean_input_photons.is_finite() && mean_input_photons >= 0.0) {
        return Err(Error::Domain {
            name: "mean_input_photons",
            value: mean_input_photons,
            reason: "must be finite and >= 0",
        });
    }
    let mu1 = mu1_model(
        pump_w,
        wg,
        losses,
        filter,
        extra_filter_transmission,
        window_s,
    )?;
    Ok(mean_input_photons / mu1)
}

/// Cross-correlation expected after conversion when noise equivalent to
/// `mu1` input photons per window is added to a heralded signal with
/// correlation `g2_source` and heralding efficiency `herald_efficiency`.
pub fn predicted_g2_converted(g2_source: f64, herald_efficiency: f64, mu1: f64) -> Result<f64> {
    if !(g2_source.is_finite() && g2_source >= 1.0) {
        return Err(Error::Domain {
            name: "g2_source",
            value: g2_source,
            reason: "must be >= 1",
        });
    }
    if !(herald_efficiency > 0.0 && herald_efficiency <= 1.0) {
        return Err(Error::Domain {
            name: "herald_efficiency",
            value: herald_efficiency,
            reason: "must lie in (0, 1]",
        });
    }
    if !(mu1.is_finite() && mu1 > 0.0) {
        return Err(Error::Domain {
            name: "mu1",
            value: mu1,
            reason: "must be > 0",
        });
    }
    let r = herald_efficiency / mu1;
    if r.is_infinite() {
        return Ok(g2_source);
    }
    Ok(g2_source * (r + 1.0) / (r + g2_source))
}

/// Splitting ratio of the frequency-domain beam splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSplitterRatio {
    pub converted: f64,
    pub unconverted: f64,
}

pub fn beamsplitter_ratio(pump_w: f64, wg: &WaveguideParams) -> Result<BeamSplitterRatio> {
    let t = internal_efficiency(pump_w, wg)?;
    Ok(BeamSplitterRatio {
        converted: t,
        unconverted: 1.0 - t,
    })
}
