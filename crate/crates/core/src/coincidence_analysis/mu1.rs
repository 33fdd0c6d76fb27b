use crate::error::{Error, Result};
use crate::photon_sim::{EventStream, WcsParams};

/// μ₁ from a straight-line fit of SNR against mean input photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu1Estimate {
    pub mu1: f64,
    pub std_error: f64,
    pub slope: f64,
    pub slope_std_error: f64,
}

/// Least-squares line through the origin of `(mean_input, snr)` points;
/// μ₁ = 1/slope. Inputs must span at least a factor 5.
pub fn extract_mu1(points: &[(f64, f64)]) -> Result<Mu1Estimate> {
    if points.len() < 2 {
        return Err(Error::Argument(format!(
            "need >= 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0))
    {
        return Err(Error::Argument(format!(
            "invalid point ({x}, {y}): mean input must be > 0"
        )));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if hi < 5.0 * lo {
        return Err(Error::Argument(format!(
            "mean inputs span {lo}..{hi}, less than a factor 5"
        )));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    if slope <= 0.0 {
        return Err(Error::NoSignal(format!(
            "SNR slope {slope} is not positive"
        )));
    }
    let rss: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
    let slope_std_error = (rss / (points.len() - 1) as f64 / sxx).sqrt();
    Ok(Mu1Estimate {
        mu1: 1.0 / slope,
        std_error: slope_std_error / (slope * slope),
        slope,
        slope_std_error,
    })
}

/// Gated measurement on a pulsed stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMeasurement {
    /// Background-subtracted clicks per pulse inside the signal window.
    pub signal_per_pulse: f64,
    /// Background clicks expected per signal window.
    pub noise_per_window: f64,
    pub snr: f64,
    pub pulses: u64,
}

impl SnrMeasurement {
    pub const CSV_HEADER: &'static str = "signal_per_pulse,noise_per_window,snr,pulses";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{}",
            self.signal_per_pulse, self.noise_per_window, self.snr, self.pulses
        )
    }
}

/// Signal-to-noise ratio of the clicks of a pulse train. Clicks within
/// `window_ns` centered on each pulse are signal plus noise; clicks farther
/// than `window_ns/2 + guard_ns` from every pulse center estimate the noise
/// rate.
pub fn measure_pulsed_snr(
    stream: &EventStream,
    wcs: &WcsParams,
    window_ns: u64,
    guard_ns: u64,
) -> Result<SnrMeasurement> {
    wcs.validate()?;
    stream.check_sorted()?;
    let half = window_ns as f64 / 2.0;
    let exclusion = half + guard_ns as f64;
    let period = wcs.repetition_period_ns;
    if window_ns == 0 || 2.0 * exclusion >= period {
        return Err(Error::Argument(format!(
            "window {window_ns} ns plus guard {guard_ns} ns leaves no background region in a {period} ns period"
        )));
    }
    let pulses = (stream.duration_ns() as f64 / period).floor() as u64;
    if pulses == 0 {
        return Err(Error::Argument(
            "stream shorter than one pulse period".into(),
        ));
    }
    let (mut on, mut off) = (0u64, 0u64);
    for t in stream.timestamps() {
        let k = (t as f64 / period).floor() as u64;
        if k >= pulses {
            continue;
        }
        let dt = (t as f64 - wcs.pulse_center_ns(k)).abs();
        if dt < half {
            on += 1;
        } else if dt >= exclusion {
            off += 1;
        }
    }
    if off == 0 {
        return Err(Error::UndefinedEstimate(
            "no background clicks, the SNR is unbounded".into(),
        ));
    }
    let background_ns_per_pulse = period - 2.0 * exclusion;
    let noise_per_window =
        off as f64 / (pulses as f64 * background_ns_per_pulse) * window_ns as f64;
    let signal_per_pulse = on as f64 / pulses as f64 - noise_per_window;
    Ok(SnrMeasurement {
        signal_per_pulse,
        noise_per_window,
        snr: signal_per_pulse / noise_per_window,
        pulses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_sim::{Channel, DetectionEvent, Origin};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_line_recovers_mu1() {
        let mu1 = 0.007;
        let pts: Vec<_> = [0.04, 0.1, 0.2, 0.5, 1.0]
            .iter()
            .map(|&x| (x, x / mu1))
            .collect();
        let est = extract_mu1(&pts).unwrap();
        assert!((est.mu1 - mu1).abs() < 1e-12);
        assert!(est.std_error < 1e-12);
    }

    #[test]
    fn noisy_line_recovers_mu1() {
        // 100 resamples with 10 % Gaussian noise on the SNR, 20 inputs
        // spread over 0.04..1.
        let mu1 = 0.007;
        let xs: Vec<f64> = (0..20).map(|k| 0.04 + 0.96 * k as f64 / 19.0).collect();
        let mut sum = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        for _ in 0..100 {
            let pts: Vec<_> = xs
                .iter()
                .map(|&x| (x, x / mu1 * (1.0 + noise.sample(&mut rng))))
                .collect();
            let est = extract_mu1(&pts).unwrap();
            assert!((est.mu1 - mu1).abs() / mu1 < 0.15, "{}", est.mu1);
            sum += est.mu1;
        }
        assert!((sum / 100.0 - mu1).abs() / mu1 < 0.02);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            extract_mu1(&[(0.1, -5.0), (1.0, -50.0)]),
            Err(Error::NoSignal(_))
        ));
        assert!(extract_mu1(&[(0.5, 10.0)]).is_err());
        assert!(extract_mu1(&[(0.5, 10.0), (1.0, 20.0)]).is_err());
        assert!(extract_mu1(&[(0.0, 0.0), (1.0, 20.0)]).is_err());
    }

    #[test]
    fn gated_snr_on_synthetic_train() {
        let w = WcsParams::nominal(1.0);
        let pulses = 1000u64;
        let duration = (pulses as f64 * w.repetition_period_ns) as u64;
        let mut ts = Vec::new();
        // Two clicks at each pulse center and one background click per
        // period in the quiet region.
        for k in 0..pulses {
            let c = w.pulse_center_ns(k) as u64;
            ts.extend([c, c + 10, c + 4000]);
        }
        let events = ts
            .into_iter()
            .map(|timestamp| DetectionEvent {
                timestamp,
                channel: Channel::Converted,
                origin: Origin::Pair,
            })
            .collect();
        let s = EventStream::new(Channel::Converted, duration, events).unwrap();
        let m = measure_pulsed_snr(&s, &w, 400, 400).unwrap();
        let background = w.repetition_period_ns - 2.0 * 600.0;
        let noise = 400.0 / background;
        assert!((m.noise_per_window - noise).abs() < 1e-12);
        assert!((m.signal_per_pulse - (2.0 - noise)).abs() < 1e-12);
        assert_eq!(m.pulses, pulses);
    }

    #[test]
    fn gated_snr_without_background_is_undefined() {
        let w = WcsParams::nominal(1.0);
        let s = EventStream::empty(Channel::Converted, 100_000);
        assert!(matches!(
            measure_pulsed_snr(&s, &w, 400, 400),
            Err(Error::UndefinedEstimate(_))
        ));
        assert!(measure_pulsed_snr(&s, &w, 9000, 400).is_err());
    }
}
