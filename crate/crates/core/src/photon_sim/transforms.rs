use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::events::{Channel, DetectionEvent, EventStream, Origin};
use super::rng::op_rng;
use crate::device_model::{self, WaveguideParams};
use crate::error::{Error, Result};

use super::source::DetectorParams;

/// Which converter output a noise process feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseBranch {
    /// Telecom SPDC noise surviving back-conversion.
    Converted,
    /// Noise back-converted to the signal wavelength.
    Unconverted,
}

impl NoiseBranch {
    /// Noise rate at the waveguide output, counts s⁻¹ GHz⁻¹.
    pub fn rate_per_ghz(self, pump_w: f64, wg: &WaveguideParams) -> Result<f64> {
        match self {
            NoiseBranch::Converted => device_model::telecom_noise_rate(pump_w, wg),
            NoiseBranch::Unconverted => device_model::backconverted_noise_rate(pump_w, wg),
        }
    }

    fn channel(self) -> Channel {
        match self {
            NoiseBranch::Converted => Channel::Converted,
            NoiseBranch::Unconverted => Channel::Unconverted,
        }
    }
}

fn check_fraction(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value: v,
            reason: "must lie in [0, 1]",
        })
    }
}

/// Homogeneous Poisson process over `[0, duration_ns)`, built from
/// exponential gaps and quantized to whole nanoseconds.
pub fn poisson_process(
    rate_hz: f64,
    duration_ns: u64,
    channel: Channel,
    origin: Origin,
    seed: u64,
    op: &str,
) -> Result<EventStream> {
    if !(rate_hz.is_finite() && rate_hz >= 0.0) {
        return Err(Error::Domain {
            name: "rate",
            value: rate_hz,
            reason: "must be finite and >= 0",
        });
    }
    if rate_hz == 0.0 || duration_ns == 0 {
        return Ok(EventStream::empty(channel, duration_ns));
    }
    let mut rng = op_rng(seed, op);
    let mean_gap_ns = 1e9 / rate_hz;
    let end = duration_ns as f64;
    let mut events = Vec::with_capacity((end / mean_gap_ns * 1.05) as usize + 16);
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(&mut rng);
        t += gap * mean_gap_ns;
        if t >= end {
            break;
        }
        events.push(DetectionEvent {
            timestamp: t as u64,
            channel,
            origin,
        });
    }
    Ok(EventStream::from_sorted_unchecked(
        channel,
        duration_ns,
        events,
    ))
}

/// Routes each photon to the converted output with probability equal to the
/// internal conversion efficiency, otherwise to the unconverted output.
pub fn apply_frequency_beamsplitter(
    signal: EventStream,
    pump_w: f64,
    wg: &WaveguideParams,
    seed: u64,
) -> Result<(EventStream, EventStream)> {
    signal.check_sorted()?;
    let t = device_model::internal_efficiency(pump_w, wg)?;
    let duration_ns = signal.duration_ns();
    let mut rng = op_rng(seed, "frequency_beamsplitter");
    let mut converted = Vec::with_capacity((signal.len() as f64 * t) as usize + 16);
    let mut unconverted = Vec::with_capacity((signal.len() as f64 * (1.0 - t)) as usize + 16);
    for e in signal.into_events() {
        if rng.random_bool(t) {
            converted.push(DetectionEvent {
                channel: Channel::Converted,
                ..e
            });
        } else {
            unconverted.push(DetectionEvent {
                channel: Channel::Unconverted,
                ..e
            });
        }
    }
    Ok((
        EventStream::from_sorted_unchecked(Channel::Converted, duration_ns, converted),
        EventStream::from_sorted_unchecked(Channel::Unconverted, duration_ns, unconverted),
    ))
}

/// Merges the converter's pump-induced noise for `branch`, integrated over
/// `effective_bandwidth_ghz`, into the stream.
pub fn inject_conversion_noise(
    stream: EventStream,
    branch: NoiseBranch,
    pump_w: f64,
    wg: &WaveguideParams,
    effective_bandwidth_ghz: f64,
    seed: u64,
) -> Result<EventStream> {
    stream.check_sorted()?;
    if !(effective_bandwidth_ghz.is_finite() && effective_bandwidth_ghz >= 0.0) {
        return Err(Error::Domain {
            name: "effective_bandwidth",
            value: effective_bandwidth_ghz,
            reason: "must be finite and >= 0",
        });
    }
    if stream.channel() != branch.channel() {
        return Err(Error::Argument(format!(
            "{:?} noise cannot be injected into a {} stream",
            branch,
            stream.channel()
        )));
    }
    let rate = branch.rate_per_ghz(pump_w, wg)? * effective_bandwidth_ghz;
    let noise = poisson_process(
        rate,
        stream.duration_ns(),
        stream.channel(),
        Origin::ConversionNoise,
        seed,
        "conversion_noise",
    )?;
    stream.merge(noise)
}

fn thin(stream: EventStream, keep: f64, seed: u64, op: &str) -> EventStream {
    let channel = stream.channel();
    let duration_ns = stream.duration_ns();
    if keep >= 1.0 {
        return stream;
    }
    if keep <= 0.0 {
        return EventStream::empty(channel, duration_ns);
    }
    let mut rng = op_rng(seed, op);
    let events = stream
        .into_events()
        .into_iter()
        .filter(|_| rng.random_bool(keep))
        .collect();
    EventStream::from_sorted_unchecked(channel, duration_ns, events)
}

/// Independent Bernoulli thinning of every event.
pub fn apply_loss(stream: EventStream, transmission: f64, seed: u64) -> Result<EventStream> {
    check_fraction("transmission", transmission)?;
    stream.check_sorted()?;
    Ok(thin(stream, transmission, seed, "loss"))
}

/// Detection with finite efficiency followed by dark counts over the whole
/// run.
pub fn apply_detector(stream: EventStream, det: &DetectorParams, seed: u64) -> Result<EventStream> {
    det.validate()?;
    stream.check_sorted()?;
    let detected = thin(stream, det.efficiency, seed, "detector_efficiency");
    let darks = poisson_process(
        det.dark_rate_hz,
        detected.duration_ns(),
        detected.channel(),
        Origin::Dark,
        seed,
        "detector_dark",
    )?;
    detected.merge(darks)
}

/// Keeps only photons of the correlated source mode, modeling a filter
/// narrower than the source cavity mode spacing. Noise and dark clicks are
/// left alone because they are broadband.
pub fn select_correlated_mode(stream: EventStream) -> EventStream {
    let channel = stream.channel();
    let duration_ns = stream.duration_ns();
    let events = stream
        .into_events()
        .into_iter()
        .filter(|e| e.origin != Origin::BackgroundMode)
        .collect();
    EventStream::from_sorted_unchecked(channel, duration_ns, events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_sim::source::{simulate_pair_source, SourceParams};

    fn uniform_stream(n: u64, channel: Channel) -> EventStream {
        let events = (0..n)
            .map(|i| DetectionEvent {
                timestamp: i * 10,
                channel,
                origin: Origin::Pair,
            })
            .collect();
        EventStream::new(channel, n * 10, events).unwrap()
    }

    #[test]
    fn beamsplitter_zero_pump_sends_all_unconverted() {
        let s = uniform_stream(1000, Channel::Unconverted);
        let (c, u) =
            apply_frequency_beamsplitter(s.clone(), 0.0, &WaveguideParams::nominal(), 1).unwrap();
        assert!(c.is_empty());
        assert_eq!(u, s);
    }

    #[test]
    fn beamsplitter_ratio_and_partition() {
        let s = uniform_stream(1_000_000, Channel::Unconverted);
        let (c, u) =
            apply_frequency_beamsplitter(s.clone(), 0.25, &WaveguideParams::nominal(), 2).unwrap();
        let frac = c.len() as f64 / s.len() as f64;
        assert!((frac - 0.348).abs() <= 0.002, "{frac}");
        let mut ts: Vec<u64> = c.timestamps().chain(u.timestamps()).collect();
        ts.sort_unstable();
        assert_eq!(ts, s.timestamps().collect::<Vec<_>>());
        c.validate().unwrap();
        u.validate().unwrap();
    }

    #[test]
    fn noise_zero_pump_is_identity() {
        let s = uniform_stream(100, Channel::Converted);
        let out = inject_conversion_noise(
            s.clone(),
            NoiseBranch::Converted,
            0.0,
            &WaveguideParams::nominal(),
            0.21,
            3,
        )
        .unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn noise_rate_bookkeeping() {
        let wg = WaveguideParams::nominal();
        let empty = EventStream::empty(Channel::Converted, 100_000_000_000);
        let out =
            inject_conversion_noise(empty, NoiseBranch::Converted, 0.5, &wg, 0.21, 4).unwrap();
        out.validate().unwrap();
        let expected = device_model::telecom_noise_rate(0.5, &wg).unwrap() * 0.21 * 100.0;
        let z = (out.len() as f64 - expected) / expected.sqrt();
        assert!(z.abs() < 3.0, "z = {z}");
        assert_eq!(out.count_origin(Origin::ConversionNoise), out.len());
    }

    #[test]
    fn backconverted_noise_quadratic_onset() {
        let wg = WaveguideParams::nominal();
        let r1 = NoiseBranch::Unconverted.rate_per_ghz(1e-3, &wg).unwrap();
        let r2 = NoiseBranch::Unconverted.rate_per_ghz(2e-3, &wg).unwrap();
        assert!((r2 / r1 - 4.0).abs() <= 0.2);
    }

    #[test]
    fn noise_branch_must_match_channel() {
        let s = EventStream::empty(Channel::Converted, 1000);
        assert!(inject_conversion_noise(
            s,
            NoiseBranch::Unconverted,
            0.1,
            &WaveguideParams::nominal(),
            1.0,
            0
        )
        .is_err());
    }

    #[test]
    fn loss_examples() {
        let s = uniform_stream(1_000_000, Channel::Converted);
        assert_eq!(apply_loss(s.clone(), 1.0, 1).unwrap(), s);
        assert!(apply_loss(s.clone(), 0.0, 1).unwrap().is_empty());
        let half = apply_loss(s, 0.5, 1).unwrap();
        assert!(
            (half.len() as i64 - 500_000).abs() <= 2200,
            "{}",
            half.len()
        );
        half.validate().unwrap();
        assert!(apply_loss(half, 1.2, 1).is_err());
    }

    #[test]
    fn detector_examples() {
        let s = uniform_stream(1000, Channel::Herald);
        assert_eq!(
            apply_detector(s, &DetectorParams::ideal(), 1).unwrap(),
            uniform_stream(1000, Channel::Herald)
        );

        let empty = EventStream::empty(Channel::Herald, 10_000_000_000);
        let det = DetectorParams {
            efficiency: 0.1,
            dark_rate_hz: 400.0,
        };
        let darks = apply_detector(empty, &det, 9).unwrap();
        assert!((darks.len() as i64 - 4000).abs() <= 190, "{}", darks.len());
        assert_eq!(darks.count_origin(Origin::Dark), darks.len());
    }

    #[test]
    fn mode_selection_drops_background_only() {
        let (_, s) = simulate_pair_source(&SourceParams::nominal(), 0.05, 1).unwrap();
        let pairs = s.count_origin(Origin::Pair);
        let kept = select_correlated_mode(s);
        assert_eq!(kept.len(), pairs);
    }

    #[test]
    fn unsorted_input_rejected() {
        let events = vec![
            DetectionEvent {
                timestamp: 5,
                channel: Channel::Converted,
                origin: Origin::Pair,
            },
            DetectionEvent {
                timestamp: 1,
                channel: Channel::Converted,
                origin: Origin::Pair,
            },
        ];
        let s = EventStream::from_sorted_unchecked(Channel::Converted, 10, events);
        assert!(matches!(apply_loss(s, 0.5, 0), Err(Error::Unsorted { .. })));
    }
}
