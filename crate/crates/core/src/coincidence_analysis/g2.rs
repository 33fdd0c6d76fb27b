use std::fmt;
use std::str::FromStr;

use super::coincidences::{sweep_windows, timestamps, CoincidenceWindow};
use crate::error::{Error, Result};
use crate::photon_sim::EventStream;

/// How detection windows are laid out on the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowConvention {
    /// Non-overlapping windows centered on reference events; a reference
    /// event inside an open window does not open a new one.
    #[default]
    HeraldAligned,
    /// One centered window per reference event, overlaps allowed.
    Sliding,
    /// Fixed grid `[kW, (k+1)W)` independent of the events.
    Grid,
}

impl WindowConvention {
    pub fn name(self) -> &'static str {
        match self {
            WindowConvention::HeraldAligned => "herald-aligned",
            WindowConvention::Sliding => "sliding",
            WindowConvention::Grid => "grid",
        }
    }
}

impl FromStr for WindowConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            WindowConvention::HeraldAligned,
            WindowConvention::Sliding,
            WindowConvention::Grid,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Argument(format!("unknown window convention '{s}'")))
    }
}

impl fmt::Display for WindowConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the coincidence count is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Singles product over the number of window trials `duration/window`.
    #[default]
    Trials,
    /// Mean coincidence count at `shifts` delays that are multiples of
    /// `spacing_ns`, far outside the correlation time.
    Accidentals { spacing_ns: u64, shifts: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct G2Options {
    pub convention: WindowConvention,
    pub normalization: Normalization,
}

/// Raw counts behind a cross-correlation. Counts from consecutive chunks of
/// one run can be added together before the ratio is formed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CrossCounts {
    pub coincidences: u64,
    /// Sum over windows of the squared per-window coincidence count.
    pub coincidences_sq: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    /// Number of window trials, duration/window.
    pub trials: f64,
    pub window_ns: u64,
}

impl CrossCounts {
    pub fn add(&mut self, other: &CrossCounts) -> Result<()> {
        if self.trials > 0.0 && other.trials > 0.0 && self.window_ns != other.window_ns {
            return Err(Error::Argument(format!(
                "cannot add counts of {} ns and {} ns windows",
                self.window_ns, other.window_ns
            )));
        }
        self.window_ns = self.window_ns.max(other.window_ns);
        self.coincidences += other.coincidences;
        self.coincidences_sq += other.coincidences_sq;
        self.singles_a += other.singles_a;
        self.singles_b += other.singles_b;
        self.trials += other.trials;
        Ok(())
    }

    /// Normalized cross-correlation `N_ab·M / (N_a·N_b)`.
    pub fn g2(&self) -> Result<G2Result> {
        if self.singles_a == 0 || self.singles_b == 0 {
            return Err(Error::UndefinedEstimate(format!(
                "g2 needs singles on both channels (got {} and {})",
                self.singles_a, self.singles_b
            )));
        }
        let value = self.coincidences as f64 * self.trials
            / (self.singles_a as f64 * self.singles_b as f64);
        Ok(G2Result {
            value,
            std_error: relative_error(self.coincidences, self.coincidences_sq) * value,
            coincidences: self.coincidences,
            singles_a: self.singles_a,
            singles_b: self.singles_b,
            window_ns: self.window_ns,
        })
    }

    /// Fraction of reference windows holding a `b` event, `N_ab/N_a`.
    pub fn conditional_probability(&self) -> Result<f64> {
        if self.singles_a == 0 {
            return Err(Error::UndefinedEstimate("no reference events".into()));
        }
        Ok(self.coincidences as f64 / self.singles_a as f64)
    }
}

/// Relative standard error of a sum of per-window counts `c_w`, treating
/// windows as independent: √(Σc_w²)/Σc_w. For single counts this is 1/√N.
fn relative_error(total: u64, total_sq: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        (total_sq as f64).sqrt() / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Result {
    pub value: f64,
    pub std_error: f64,
    pub coincidences: u64,
    pub singles_a: u64,
    pub singles_b: u64,
    pub window_ns: u64,
}

impl G2Result {
    pub const CSV_HEADER: &'static str =
        "g2,g2_std_error,coincidences,singles_a,singles_b,window_ns";

    pub fn csv_fields(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.value,
            self.std_error,
            self.coincidences,
            self.singles_a,
            self.singles_b,
            self.window_ns
        )
    }

    /// Distance from `target` in standard errors.
    pub fn sigmas_from(&self, target: f64) -> f64 {
        if self.std_error > 0.0 {
            (self.value - target).abs() / self.std_error
        } else if self.value == target {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

fn duration_trials(duration_s: f64, window_ns: u64) -> Result<f64> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::Domain {
            name: "duration",
            value: duration_s,
            reason: "must be > 0",
        });
    }
    let trials = duration_s * 1e9 / window_ns as f64;
    if trials < 1.0 {
        return Err(Error::Argument(format!(
            "duration {duration_s} s is shorter than the {window_ns} ns window"
        )));
    }
    Ok(trials)
}

/// Coincidence counts of `a` against `b` under `convention`.
pub fn cross_counts(
    a: &EventStream,
    b: &EventStream,
    window_ns: u64,
    duration_s: f64,
    convention: WindowConvention,
) -> Result<CrossCounts> {
    let window = CoincidenceWindow::centered(window_ns)?;
    let trials = duration_trials(duration_s, window_ns)?;
    let ta = timestamps(a)?;
    let tb = timestamps(b)?;
    let (coincidences, coincidences_sq, singles_a) = match convention {
        WindowConvention::Sliding => {
            let (mut n, mut sq) = (0u64, 0u64);
            sweep_windows(&ta, &tb, window, |_, lo, hi| {
                let c = (hi - lo) as u64;
                n += c;
                sq += c * c;
            });
            (n, sq, ta.len() as u64)
        }
        WindowConvention::HeraldAligned => {
            let (mut n, mut sq, mut opened) = (0u64, 0u64, 0u64);
            for (lo, hi) in aligned_windows(&ta, &tb, window) {
                let c = (hi - lo) as u64;
                n += c;
                sq += c * c;
                opened += 1;
            }
            (n, sq, opened)
        }
        WindowConvention::Grid => {
            let (n, sq) = grid_products(&ta, &tb, window_ns);
            (n, sq, ta.len() as u64)
        }
    };
    Ok(CrossCounts {
        coincidences,
        coincidences_sq,
        singles_a,
        singles_b: tb.len() as u64,
        trials,
        window_ns,
    })
}

/// `b` index ranges of the non-overlapping windows opened by `a` events.
pub(crate) fn aligned_windows(
    a: &[u64],
    b: &[u64],
    window: CoincidenceWindow,
) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut open_until = i64::MIN;
    sweep_windows(a, b, window, |i, lo, hi| {
        if window.start(a[i]) >= open_until {
            open_until = window.end(a[i]);
            out.push((lo, hi));
        }
    });
    out
}

/// Σ_k a_k·b_k and Σ_k (a_k·b_k)² over grid windows of width `w`.
fn grid_products(a: &[u64], b: &[u64], w: u64) -> (u64, u64) {
    let (mut n, mut sq) = (0u64, 0u64);
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() && j < b.len() {
        let ka = a[i] / w;
        let kb = b[j] / w;
        if ka < kb {
            i += 1;
        } else if kb < ka {
            j += 1;
        } else {
            let i0 = i;
            while i < a.len() && a[i] / w == ka {
                i += 1;
            }
            let j0 = j;
            while j < b.len() && b[j] / w == ka {
                j += 1;
            }
            let c = ((i - i0) * (j - j0)) as u64;
            n += c;
            sq += c * c;
        }
    }
    (n, sq)
}

/// Normalized cross-correlation with the default options.
pub fn g2_cross(
    a: &EventStream,
    b: &EventStream,
    window_ns: u64,
    duration_s: f64,
) -> Result<G2Result> {
    g2_cross_with(a, b, window_ns, duration_s, &G2Options::default())
}

pub fn g2_cross_with(
    a: &EventStream,
    b: &EventStream,
    window_ns: u64,
    duration_s: f64,
    options: &G2Options,
) -> Result<G2Result> {
    let counts = cross_counts(a, b, window_ns, duration_s, options.convention)?;
    match options.normalization {
        Normalization::Trials => counts.g2(),
        Normalization::Accidentals { spacing_ns, shifts } => {
            accidental_normalized(a, b, window_ns, counts, spacing_ns, shifts)
        }
    }
}

fn accidental_normalized(
    a: &EventStream,
    b: &EventStream,
    window_ns: u64,
    counts: CrossCounts,
    spacing_ns: u64,
    shifts: u32,
) -> Result<G2Result> {
    if shifts == 0 || spacing_ns < window_ns {
        return Err(Error::Argument(format!(
            "accidental normalization needs >= 1 shift and spacing >= window (got {shifts} x {spacing_ns} ns)"
        )));
    }
    if counts.singles_a == 0 || counts.singles_b == 0 {
        return counts.g2();
    }
    let ta = timestamps(a)?;
    let tb = timestamps(b)?;
    let centered = -((window_ns / 2) as i64);
    let mut accidental = 0u64;
    for k in 1..=shifts as i64 {
        let window = CoincidenceWindow::new(window_ns, centered + k * spacing_ns as i64)?;
        sweep_windows(&ta, &tb, window, |_, lo, hi| accidental += (hi - lo) as u64);
    }
    if accidental == 0 {
        return Err(Error::UndefinedEstimate(
            "no accidental coincidences at the shifted delays".into(),
        ));
    }
    let mean = accidental as f64 / shifts as f64;
    let value = counts.coincidences as f64 / mean;
    let rel = (relative_error(counts.coincidences, counts.coincidences_sq).powi(2)
        + 1.0 / accidental as f64)
        .sqrt();
    Ok(G2Result {
        value,
        std_error: value * rel,
        ..counts.g2()?
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon_sim::{
        apply_detector, apply_loss, poisson_process, simulate_pair_source, Channel, DetectionEvent,
        DetectorParams, Origin, SourceParams,
    };

    fn from_times(channel: Channel, ts: &[u64], duration: u64) -> EventStream {
        let events = ts
            .iter()
            .map(|&t| DetectionEvent {
                timestamp: t,
                channel,
                origin: Origin::Pair,
            })
            .collect();
        EventStream::new(channel, duration, events).unwrap()
    }

    /// Closed-form cross-correlation of one correlated thermal mode against
    /// the same mode plus `n_bg` independent thermal modes, per cell.
    fn thermal_moment_g2(mu: f64, n_bg: u32) -> f64 {
        let m = 1.0 + n_bg as f64;
        (m + 1.0) / m + 1.0 / (m * mu)
    }

    /// Truncated-Fock enumeration of the same per-cell moments: sum over
    /// every photon number of the correlated mode and the total background
    /// occupancy, each truncated at `cut` photons per mode.
    fn enumerated_g2(mu: f64, n_bg: u32, cut: usize) -> f64 {
        let q = mu / (1.0 + mu);
        let p: Vec<f64> = (0..=cut).map(|n| (1.0 - q) * q.powi(n as i32)).collect();
        // Distribution of the background total by repeated convolution.
        let mut bg = vec![1.0];
        for _ in 0..n_bg {
            let mut next = vec![0.0; bg.len() + cut];
            for (i, a) in bg.iter().enumerate() {
                for (j, b) in p.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            bg = next;
        }
        let (mut ni, mut ns, mut nsi) = (0.0, 0.0, 0.0);
        for (n, pn) in p.iter().enumerate() {
            for (k, pk) in bg.iter().enumerate() {
                let w = pn * pk;
                let s = (n + k) as f64;
                ni += w * n as f64;
                ns += w * s;
                nsi += w * n as f64 * s;
            }
        }
        nsi / (ni * ns)
    }

    fn ideal_source(mu: f64, n_bg: u32) -> SourceParams {
        SourceParams {
            mean_pairs_per_cell: mu,
            background_modes: n_bg,
            cell_length_ns: 100.0,
            herald_chain_transmission: 1.0,
            signal_chain_transmission: 1.0,
        }
    }

    fn grid_options() -> G2Options {
        G2Options {
            convention: WindowConvention::Grid,
            normalization: Normalization::Trials,
        }
    }

    #[test]
    fn convention_names_round_trip() {
        for c in [
            WindowConvention::HeraldAligned,
            WindowConvention::Sliding,
            WindowConvention::Grid,
        ] {
            assert_eq!(c.name().parse::<WindowConvention>().unwrap(), c);
        }
        assert!("nope".parse::<WindowConvention>().is_err());
    }

    #[test]
    fn enumeration_matches_moment_formula() {
        for mu in [0.005, 0.01, 0.05] {
            for n_bg in [0, 3, 7] {
                let a = enumerated_g2(mu, n_bg, 6);
                let b = thermal_moment_g2(mu, n_bg);
                assert!((a - b).abs() / b < 1e-6, "mu={mu} n_bg={n_bg}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn source_matches_moment_formula_on_grid() {
        let duration = 2.0;
        for (i, mu) in [0.005, 0.01, 0.05].into_iter().enumerate() {
            for (j, n_bg) in [0u32, 3, 7].into_iter().enumerate() {
                let seed = 200 + (3 * i + j) as u64;
                let (h, s) = simulate_pair_source(&ideal_source(mu, n_bg), duration, seed).unwrap();
                let g = g2_cross_with(&h, &s, 100, duration, &grid_options()).unwrap();
                let expected = thermal_moment_g2(mu, n_bg);
                assert!(
                    g.sigmas_from(expected) < 3.0,
                    "mu={mu} n_bg={n_bg}: {} ± {} vs {expected}",
                    g.value,
                    g.std_error
                );
            }
        }
    }

    #[test]
    fn spec_source_examples() {
        let (h, s) = simulate_pair_source(&ideal_source(0.01, 7), 2.0, 7).unwrap();
        let g = g2_cross_with(&h, &s, 100, 2.0, &grid_options()).unwrap();
        assert!(g.sigmas_from(13.625) < 3.0, "{g:?}");
        let (h, s) = simulate_pair_source(&ideal_source(0.01, 0), 2.0, 8).unwrap();
        let g = g2_cross_with(&h, &s, 100, 2.0, &grid_options()).unwrap();
        assert!(g.sigmas_from(102.0) < 3.0, "{g:?}");
    }

    #[test]
    fn independent_poisson_streams_are_uncorrelated() {
        let duration_ns = 10_000_000_000;
        for seed in 0..4 {
            let a = poisson_process(
                20_000.0,
                duration_ns,
                Channel::Herald,
                Origin::Dark,
                seed,
                "a",
            )
            .unwrap();
            let b = poisson_process(
                30_000.0,
                duration_ns,
                Channel::Converted,
                Origin::Dark,
                seed,
                "b",
            )
            .unwrap();
            for convention in [
                WindowConvention::HeraldAligned,
                WindowConvention::Sliding,
                WindowConvention::Grid,
            ] {
                let options = G2Options {
                    convention,
                    normalization: Normalization::Trials,
                };
                let g = g2_cross_with(&a, &b, 400, 10.0, &options).unwrap();
                assert!(g.sigmas_from(1.0) < 3.0, "{convention}: {g:?}");
            }
        }
    }

    #[test]
    fn accidental_normalization_agrees() {
        let src = SourceParams::nominal();
        let (h, s) = simulate_pair_source(&src, 20.0, 21).unwrap();
        let h = apply_detector(h, &DetectorParams::herald(), 22).unwrap();
        let s = apply_detector(s, &DetectorParams::visible(), 23).unwrap();
        let trials = g2_cross(&h, &s, 400, 20.0).unwrap();
        let options = G2Options {
            convention: WindowConvention::Sliding,
            normalization: Normalization::Accidentals {
                spacing_ns: 5_000,
                shifts: 20,
            },
        };
        let acc = g2_cross_with(&h, &s, 400, 20.0, &options).unwrap();
        let sigma = (trials.std_error.powi(2) + acc.std_error.powi(2)).sqrt();
        assert!(
            (trials.value - acc.value).abs() < 3.0 * sigma,
            "{trials:?} {acc:?}"
        );
    }

    #[test]
    fn zero_singles_is_undefined() {
        let a = from_times(Channel::Herald, &[10, 20], 1_000_000);
        let b = EventStream::empty(Channel::Converted, 1_000_000);
        assert!(matches!(
            g2_cross(&a, &b, 100, 1e-3),
            Err(Error::UndefinedEstimate(_))
        ));
        assert!(matches!(
            g2_cross(&b.clone().relabel(Channel::Herald), &a, 100, 1e-3),
            Err(Error::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn estimators_ignore_origin_tags() {
        let (h, s) = simulate_pair_source(&SourceParams::nominal(), 1.0, 4).unwrap();
        let s = apply_detector(s, &DetectorParams::visible(), 5).unwrap();
        for convention in [
            WindowConvention::HeraldAligned,
            WindowConvention::Sliding,
            WindowConvention::Grid,
        ] {
            let options = G2Options {
                convention,
                normalization: Normalization::Trials,
            };
            let tagged = g2_cross_with(&h, &s, 400, 1.0, &options).unwrap();
            let scrubbed = g2_cross_with(&h.scrubbed(), &s.scrubbed(), 400, 1.0, &options).unwrap();
            assert_eq!(tagged, scrubbed);
        }
    }

    #[test]
    fn added_noise_drives_g2_toward_one() {
        let duration = 5.0;
        let (h, s) = simulate_pair_source(&ideal_source(0.01, 3), duration, 31).unwrap();
        let s = apply_loss(s, 0.3, 32).unwrap();
        let mut last = f64::INFINITY;
        for (k, rate) in [0.0, 1e5, 3e5, 1e6, 3e6].into_iter().enumerate() {
            let noisy = if rate > 0.0 {
                let noise = poisson_process(
                    rate,
                    s.duration_ns(),
                    Channel::Unconverted,
                    Origin::Dark,
                    40 + k as u64,
                    "noise",
                )
                .unwrap();
                s.clone().merge(noise).unwrap()
            } else {
                s.clone()
            };
            let g = g2_cross(&h, &noisy, 400, duration).unwrap();
            assert!(
                g.value < last && g.value > 1.0,
                "rate {rate}: {} after {last}",
                g.value
            );
            last = g.value;
        }
        assert!(last < 1.5);
    }

    #[test]
    fn herald_aligned_windows_do_not_overlap() {
        let a = from_times(Channel::Herald, &[1000, 1100, 1500, 3000], 10_000);
        let b = from_times(Channel::Converted, &[1050, 1450, 1600, 2990], 10_000);
        let c = cross_counts(&a, &b, 400, 1e-5, WindowConvention::HeraldAligned).unwrap();
        // Windows open at 1000 ([800,1200)) and 1500 ([1300,1700)) and 3000.
        assert_eq!(c.singles_a, 3);
        assert_eq!(c.coincidences, 1 + 2 + 1);
        let s = cross_counts(&a, &b, 400, 1e-5, WindowConvention::Sliding).unwrap();
        assert_eq!(s.singles_a, 4);
        assert_eq!(s.coincidences, 1 + 1 + 2 + 1);
    }

    #[test]
    fn grid_counts_products() {
        let a = from_times(Channel::Herald, &[10, 20, 150, 450], 1000);
        let b = from_times(Channel::Converted, &[30, 120, 199, 300], 1000);
        let c = cross_counts(&a, &b, 100, 1e-6, WindowConvention::Grid).unwrap();
        assert_eq!(c.coincidences, 2 + 2);
        assert_eq!(c.coincidences_sq, 4 + 4);
        assert_eq!(c.trials, 10.0);
    }

    #[test]
    fn counts_merge() {
        let mut total = CrossCounts::default();
        let part = CrossCounts {
            coincidences: 3,
            coincidences_sq: 5,
            singles_a: 10,
            singles_b: 20,
            trials: 100.0,
            window_ns: 400,
        };
        total.add(&part).unwrap();
        total.add(&part).unwrap();
        assert_eq!(total.coincidences, 6);
        assert_eq!(total.trials, 200.0);
        assert!((total.g2().unwrap().value - part.g2().unwrap().value).abs() < 1e-12);
        let other = CrossCounts {
            window_ns: 100,
            ..part
        };
        assert!(total.add(&other).is_err());
    }

    #[test]
    fn csv_row_matches_header() {
        let g = G2Result {
            value: 2.5,
            std_error: 0.1,
            coincidences: 10,
            singles_a: 100,
            singles_b: 200,
            window_ns: 400,
        };
        assert_eq!(
            g.csv_fields().split(',').count(),
            G2Result::CSV_HEADER.split(',').count()
        );
        assert_eq!(g.csv_fields(), "2.5,0.1,10,100,200,400");
    }
}
