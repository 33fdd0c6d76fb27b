use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal, Poisson};

use super::events::{Channel, DetectionEvent, EventStream, Origin};
use super::rng::{op_rng, SimRng};
use crate::error::{Error, Result};

/// FWHM of a Gaussian in units of its standard deviation, 2√(2 ln 2).
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

/// Cavity-enhanced SPDC pair source in the coherence-cell picture: time is
/// cut into cells one correlation time long, and every mode holds a thermal
/// photon number per cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    /// Mean thermal occupancy of the correlated mode per cell.
    pub mean_pairs_per_cell: f64,
    /// Uncorrelated modes reaching the signal arm only.
    pub background_modes: u32,
    pub cell_length_ns: f64,
    /// Survival probability of an idler photon up to the herald detector.
    pub herald_chain_transmission: f64,
    /// Survival probability of a signal photon up to the converter input.
    pub signal_chain_transmission: f64,
}

impl SourceParams {
    /// Source settings reproducing the bow-tie cavity source: 8 cavity
    /// modes reach the signal arm, one reaches the herald, a 120.9 ns
    /// correlation time and 25 % heralding efficiency in fiber.
    ///
    /// The occupancy and idler transmission are not measured directly; they
    /// are chosen so that the heralded rate is ≈ 280 photons/s and the
    /// 400 ns-window cross-correlation with the herald detector dark counts
    /// sits near 16.
    pub fn nominal() -> Self {
        Self {
            mean_pairs_per_cell: 1.87e-3,
            background_modes: 7,
            cell_length_ns: 120.9,
            herald_chain_transmission: 0.724,
            signal_chain_transmission: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidParams {
                what: "SourceParams",
                reason,
            })
        };
        if !(self.mean_pairs_per_cell.is_finite() && self.mean_pairs_per_cell >= 0.0) {
            return bad(format!(
                "mean_pairs_per_cell = {} must be >= 0",
                self.mean_pairs_per_cell
            ));
        }
        if !(self.cell_length_ns.is_finite() && self.cell_length_ns > 0.0) {
            return bad(format!(
                "cell_length = {} ns must be > 0",
                self.cell_length_ns
            ));
        }
        for (name, t) in [
            ("herald_chain_transmission", self.herald_chain_transmission),
            ("signal_chain_transmission", self.signal_chain_transmission),
        ] {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("{name} = {t} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Coherence cells per second.
    pub fn cell_rate_hz(&self) -> f64 {
        1e9 / self.cell_length_ns
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub efficiency: f64,
    pub dark_rate_hz: f64,
}

impl DetectorParams {
    /// InGaAs detector on the herald (idler) arm.
    pub fn herald() -> Self {
        Self {
            efficiency: 0.10,
            dark_rate_hz: 400.0,
        }
    }

    /// InGaAs detector on the converted telecom arm.
    pub fn telecom() -> Self {
        Self {
            efficiency: 0.10,
            dark_rate_hz: 10.0,
        }
    }

    /// Silicon detector on the unconverted 606 nm arm. Its specifications
    /// are not quoted; these are typical values.
    pub fn visible() -> Self {
        Self {
            efficiency: 0.60,
            dark_rate_hz: 100.0,
        }
    }

    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            dark_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidParams {
                what: "DetectorParams",
                reason: format!("efficiency = {} must lie in [0, 1]", self.efficiency),
            });
        }
        if !(self.dark_rate_hz.is_finite() && self.dark_rate_hz >= 0.0) {
            return Err(Error::InvalidParams {
                what: "DetectorParams",
                reason: format!("dark rate = {} Hz must be >= 0", self.dark_rate_hz),
            });
        }
        Ok(())
    }
}

/// Train of Gaussian weak coherent pulses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WcsParams {
    pub mean_photons_per_pulse: f64,
    pub pulse_fwhm_ns: f64,
    pub repetition_period_ns: f64,
}

impl WcsParams {
    pub fn nominal(mean_photons_per_pulse: f64) -> Self {
        Self {
            mean_photons_per_pulse,
            pulse_fwhm_ns: 200.0,
            repetition_period_ns: 10_000.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| {
            Err(Error::InvalidParams {
                what: "WcsParams",
                reason,
            })
        };
        if !(self.mean_photons_per_pulse.is_finite() && self.mean_photons_per_pulse >= 0.0) {
            return bad(format!(
                "mean photon number {} must be >= 0",
                self.mean_photons_per_pulse
            ));
        }
        if !(self.pulse_fwhm_ns > 0.0 && self.repetition_period_ns > 0.0) {
            return bad("pulse width and period must be > 0".into());
        }
        if self.pulse_fwhm_ns >= self.repetition_period_ns {
            return bad(format!(
                "pulse FWHM {} ns must be shorter than the period {} ns",
                self.pulse_fwhm_ns, self.repetition_period_ns
            ));
        }
        Ok(())
    }

    pub fn sigma_ns(&self) -> f64 {
        self.pulse_fwhm_ns / GAUSSIAN_FWHM_PER_SIGMA
    }

    /// Center of pulse `k`.
    pub fn pulse_center_ns(&self, k: u64) -> f64 {
        (k as f64 + 0.5) * self.repetition_period_ns
    }
}

/// Calls `visit(cell, n)` for every cell whose thermal occupancy `n` is
/// non-zero. Empty cells are skipped geometrically, so the cost scales with
/// the number of photons rather than the number of cells.
fn visit_thermal_cells(
    rng: &mut SimRng,
    mean: f64,
    n_cells: u64,
    mut visit: impl FnMut(&mut SimRng, u64, u64),
) {
    if mean <= 0.0 || n_cells == 0 {
        return;
    }
    let occupied = mean / (1.0 + mean);
    // P(n) = (1 − q) qⁿ with q = μ/(1+μ); P(n ≥ 1) = q and n − 1 | n ≥ 1 has
    // the same law as n.
    let skip = Geometric::new(occupied).expect("occupation probability in (0, 1)");
    let extra = Geometric::new(1.0 / (1.0 + mean)).expect("probability in (0, 1]");
    let mut cell = skip.sample(rng);
    while cell < n_cells {
        let n = 1 + extra.sample(rng);
        visit(rng, cell, n);
        cell = cell.saturating_add(1).saturating_add(skip.sample(rng));
    }
}

fn place_in_cell(rng: &mut SimRng, cell: u64, cell_ns: f64, duration_ns: u64) -> u64 {
    let t = (cell as f64 + rng.random::<f64>()) * cell_ns;
    (t as u64).min(duration_ns.saturating_sub(1))
}

/// Herald (idler side) and signal photon streams of the pair source.
///
/// The correlated mode sends every pair's idler to the herald arm and its
/// signal to the signal arm; each background mode adds independent thermal
/// photons to the signal arm only. Photons survive their arm's transmission
/// independently and land uniformly inside their cell. The returned herald
/// stream is before the herald detector.
pub fn simulate_pair_source(
    src: &SourceParams,
    duration_s: f64,
    seed: u64,
) -> Result<(EventStream, EventStream)> {
    src.validate()?;
    let duration_ns = duration_to_ns(duration_s)?;
    let n_cells = (duration_ns as f64 / src.cell_length_ns).floor() as u64;
    let mut rng = op_rng(seed, "pair_source");

    let mut herald = Vec::new();
    let mut signal = Vec::new();
    let cell_ns = src.cell_length_ns;

    visit_thermal_cells(
        &mut rng,
        src.mean_pairs_per_cell,
        n_cells,
        |rng, cell, n| {
            for _ in 0..n {
                if rng.random_bool(src.herald_chain_transmission) {
                    herald.push(DetectionEvent {
                        timestamp: place_in_cell(rng, cell, cell_ns, duration_ns),
                        channel: Channel::Herald,
                        origin: Origin::Pair,
                    });
                }
                if rng.random_bool(src.signal_chain_transmission) {
                    signal.push(DetectionEvent {
                        timestamp: place_in_cell(rng, cell, cell_ns, duration_ns),
                        channel: Channel::Unconverted,
                        origin: Origin::Pair,
                    });
                }
            }
        },
    );
    // A thermal mode thinned by a transmission t is again thermal with mean
    // μ·t, so the surviving background photons are drawn directly.
    let background_mean = src.mean_pairs_per_cell * src.signal_chain_transmission;
    for _ in 0..src.background_modes {
        visit_thermal_cells(&mut rng, background_mean, n_cells, |rng, cell, n| {
            for _ in 0..n {
                signal.push(DetectionEvent {
                    timestamp: place_in_cell(rng, cell, cell_ns, duration_ns),
                    channel: Channel::Unconverted,
                    origin: Origin::BackgroundMode,
                });
            }
        });
    }

    Ok((
        EventStream::from_unsorted(Channel::Herald, duration_ns, herald),
        EventStream::from_unsorted(Channel::Unconverted, duration_ns, signal),
    ))
}

/// Photons of `n_pulses` Gaussian weak coherent pulses on the signal arm.
/// Pulse `k` is centered at (k + ½)·period; photons falling outside the run
/// are dropped.
pub fn simulate_wcs(w: &WcsParams, n_pulses: u64, seed: u64) -> Result<EventStream> {
    w.validate()?;
    let duration_ns = (n_pulses as f64 * w.repetition_period_ns).round() as u64;
    if w.mean_photons_per_pulse == 0.0 || n_pulses == 0 {
        return Ok(EventStream::empty(Channel::Unconverted, duration_ns));
    }
    let mut rng = op_rng(seed, "wcs");
    let count =
        Poisson::new(w.mean_photons_per_pulse).map_err(|e| Error::Argument(e.to_string()))?;
    let shape = Normal::new(0.0, w.sigma_ns()).map_err(|e| Error::Argument(e.to_string()))?;
    let mut events =
        Vec::with_capacity((n_pulses as f64 * w.mean_photons_per_pulse * 1.1) as usize);
    for k in 0..n_pulses {
        let n = count.sample(&mut rng) as u64;
        let center = w.pulse_center_ns(k);
        for _ in 0..n {
            let t = center + shape.sample(&mut rng);
            if t >= 0.0 && t < duration_ns as f64 {
                events.push(DetectionEvent {
                    timestamp: t as u64,
                    channel: Channel::Unconverted,
                    origin: Origin::Coherent,
                });
            }
        }
    }
    Ok(EventStream::from_unsorted(
        Channel::Unconverted,
        duration_ns,
        events,
    ))
}

pub(crate) fn duration_to_ns(duration_s: f64) -> Result<u64> {
    if !(duration_s.is_finite() && duration_s >= 0.0) {
        return Err(Error::Domain {
            name: "duration",
            value: duration_s,
            reason: "must be finite and >= 0",
        });
    }
    Ok((duration_s * 1e9).round() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_occupancy_gives_empty_streams() {
        let src = SourceParams {
            mean_pairs_per_cell: 0.0,
            ..SourceParams::nominal()
        };
        let (h, s) = simulate_pair_source(&src, 0.01, 1).unwrap();
        assert!(h.is_empty() && s.is_empty());
    }

    #[test]
    fn streams_are_valid_and_tagged() {
        let (h, s) = simulate_pair_source(&SourceParams::nominal(), 0.05, 3).unwrap();
        h.validate().unwrap();
        s.validate().unwrap();
        assert_eq!(h.channel(), Channel::Herald);
        assert!(h.events().iter().all(|e| e.origin == Origin::Pair));
        assert!(s.count_origin(Origin::BackgroundMode) > s.count_origin(Origin::Pair));
    }

    #[test]
    fn deterministic_per_seed() {
        let src = SourceParams::nominal();
        let a = simulate_pair_source(&src, 0.02, 11).unwrap();
        let b = simulate_pair_source(&src, 0.02, 11).unwrap();
        let c = simulate_pair_source(&src, 0.02, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn mean_photon_numbers() {
        let src = SourceParams {
            mean_pairs_per_cell: 0.05,
            background_modes: 3,
            cell_length_ns: 100.0,
            herald_chain_transmission: 1.0,
            signal_chain_transmission: 1.0,
        };
        // 10⁶ cells.
        let (h, s) = simulate_pair_source(&src, 0.1, 5).unwrap();
        let cells = 1e6;
        let mean_h = h.len() as f64 / cells;
        let mean_s = s.len() as f64 / cells;
        // Var n = μ² + μ per mode.
        let sd_h = ((0.05f64 * 0.05 + 0.05) / cells).sqrt();
        let sd_s = (4.0 * (0.05f64 * 0.05 + 0.05) / cells).sqrt();
        assert!((mean_h - 0.05).abs() < 4.0 * sd_h, "{mean_h}");
        assert!((mean_s - 0.2).abs() < 4.0 * sd_s, "{mean_s}");
    }

    #[test]
    fn thinned_background_stays_thermal() {
        // Thinning thermal light with mean μ by t gives mean μt and
        // variance (μt)² + μt per cell.
        let src = SourceParams {
            mean_pairs_per_cell: 0.4,
            background_modes: 1,
            cell_length_ns: 100.0,
            herald_chain_transmission: 1.0,
            signal_chain_transmission: 0.5,
        };
        let (_, s) = simulate_pair_source(&src, 0.1, 8).unwrap();
        let mut cells = vec![0u32; 1_000_000];
        for e in s
            .events()
            .iter()
            .filter(|e| e.origin == Origin::BackgroundMode)
        {
            cells[(e.timestamp / 100) as usize] += 1;
        }
        let n = cells.len() as f64;
        let mean = cells.iter().map(|&c| f64::from(c)).sum::<f64>() / n;
        let var = cells
            .iter()
            .map(|&c| (f64::from(c) - mean).powi(2))
            .sum::<f64>()
            / n;
        assert!((mean - 0.2).abs() < 0.003, "{mean}");
        assert!((var - 0.24).abs() < 0.006, "{var}");
    }

    #[test]
    fn wcs_examples() {
        let none = simulate_wcs(&WcsParams::nominal(0.0), 1000, 1).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.duration_ns(), 10_000_000);

        let w = WcsParams::nominal(1.0);
        let s = simulate_wcs(&w, 1_000_000, 2).unwrap();
        s.validate().unwrap();
        assert!((s.len() as i64 - 1_000_000).abs() <= 3000, "{}", s.len());

        let inside = s
            .timestamps()
            .filter(|&t| {
                let k = (t as f64 / w.repetition_period_ns).floor() as u64;
                (t as f64 - w.pulse_center_ns(k)).abs() < 200.0
            })
            .count();
        assert!(inside as f64 / s.len() as f64 >= 0.98);
    }

    #[test]
    fn wcs_rejects_overlong_pulses() {
        let w = WcsParams {
            mean_photons_per_pulse: 1.0,
            pulse_fwhm_ns: 500.0,
            repetition_period_ns: 400.0,
        };
        assert!(simulate_wcs(&w, 10, 0).is_err());
    }

    #[test]
    fn invalid_source_rejected() {
        let mut src = SourceParams::nominal();
        src.cell_length_ns = 0.0;
        assert!(simulate_pair_source(&src, 1.0, 0).is_err());
        let mut src = SourceParams::nominal();
        src.signal_chain_transmission = 1.5;
        assert!(src.validate().is_err());
    }
}
