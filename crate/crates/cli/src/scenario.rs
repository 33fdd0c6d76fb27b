//! Builtin scenarios: their default configurations, how a configuration
//! resolves to a runnable plan, and what each plan writes.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use qfc_core::coincidence_analysis::{
    g2_sweep_point, heralded_g2_point, sweep_point_seed, wcs_mu1_point, HeraldedG2, SweepRow,
    SweepSettings, WindowConvention,
};
use qfc_core::device_model::{
    device_efficiency, internal_efficiency, FilterSpec, LossBudget, WaveguideParams,
};
use qfc_core::model_fit::{
    fit_efficiency_curve, fit_noise_model, fit_noise_slope, noise_model_rate,
    synthetic_efficiency_data, synthetic_noise_data, Dataset, FitResult,
};
use qfc_core::photon_sim::{
    derive_seed, io, ArmSpec, Arms, ChainParams, DetectorParams, NoiseBranch, SourceParams,
    WcsParams,
};
use rayon::prelude::*;

use crate::config::{Bound, Diagnostic, Dim, RawConfig, Resolved, Resolver};

const W: (Dim, &str) = (Dim::Power, "W");
const MW: (Dim, &str) = (Dim::Power, "mW");
const NS: (Dim, &str) = (Dim::Time, "ns");
const S: (Dim, &str) = (Dim::Time, "s");
const HZ: (Dim, &str) = (Dim::Frequency, "Hz");
const GHZ: (Dim, &str) = (Dim::Frequency, "GHz");
const CM: (Dim, &str) = (Dim::Length, "cm");
const ETA_N: (Dim, &str) = (Dim::NormalizedEfficiency, "/W/cm^2");
const ALPHA_N: (Dim, &str) = (Dim::NoiseCoefficient, "Hz/mW/cm/THz");

pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
    /// Default configuration text.
    pub config: &'static str,
}

pub const SCENARIOS: &[ScenarioInfo] = &[
    ScenarioInfo {
        name: "fig2a-efficiency",
        description: "internal and device conversion efficiency vs pump power (model curve)",
        config: include_str!("../scenarios/fig2a-efficiency.conf"),
    },
    ScenarioInfo {
        name: "fig2b-mu1",
        description: "weak coherent pulse SNR and extracted mu1 vs pump power",
        config: include_str!("../scenarios/fig2b-mu1.conf"),
    },
    ScenarioInfo {
        name: "fig3-noise",
        description: "pump-only telecom and back-converted noise rates vs pump power",
        config: include_str!("../scenarios/fig3-noise.conf"),
    },
    ScenarioInfo {
        name: "fig4a-correlations",
        description: "herald cross-correlation of converted and unconverted photons vs pump power",
        config: include_str!("../scenarios/fig4a-correlations.conf"),
    },
    ScenarioInfo {
        name: "fig4b-heralded-g2",
        description: "heralded autocorrelation and triple-coincidence histogram at one pump power",
        config: include_str!("../scenarios/fig4b-heralded-g2.conf"),
    },
    ScenarioInfo {
        name: "fit-efficiency",
        description: "fit of eta_max and eta_n to an efficiency sweep",
        config: include_str!("../scenarios/fit-efficiency.conf"),
    },
    ScenarioInfo {
        name: "fit-noise",
        description: "fit of the noise generation coefficient alpha_n to pump-only noise rates",
        config: include_str!("../scenarios/fit-noise.conf"),
    },
];

pub fn builtin(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

/// Which converter output a fit or noise sweep looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Branch(NoiseBranch);

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "telecom" => Ok(Branch(NoiseBranch::Converted)),
            "backconverted" => Ok(Branch(NoiseBranch::Unconverted)),
            other => Err(format!(
                "unknown branch `{other}`; expected telecom or backconverted"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventFormat {
    None,
    Csv,
    Binary,
}

impl FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(EventFormat::None),
            "csv" => Ok(EventFormat::Csv),
            "binary" => Ok(EventFormat::Binary),
            other => Err(format!(
                "unknown event format `{other}`; expected none, csv or binary"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum DataSource {
    File(PathBuf),
    SyntheticEfficiency {
        pump_max_w: f64,
        points: usize,
        relative_noise: f64,
    },
    SyntheticNoise {
        pumps_mw: Vec<f64>,
        counting_time_s: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Plan {
    EfficiencyCurve {
        waveguide: WaveguideParams,
        losses: LossBudget,
        pumps: Vec<f64>,
    },
    Mu1Sweep {
        chain: ChainParams,
        wcs: WcsParams,
        means: Vec<f64>,
        pulses: u64,
        window_ns: u64,
        guard_ns: u64,
        pumps: Vec<f64>,
    },
    NoiseSweep {
        waveguide: WaveguideParams,
        telecom_bandwidth_ghz: f64,
        visible_bandwidth_ghz: f64,
        counting_time_s: f64,
        pumps: Vec<f64>,
    },
    Correlations {
        chain: ChainParams,
        settings: SweepSettings,
        pumps: Vec<f64>,
    },
    HeraldedG2 {
        chain: ChainParams,
        settings: SweepSettings,
        pump_w: f64,
        events: EventFormat,
        event_duration_s: f64,
    },
    FitEfficiency {
        waveguide: WaveguideParams,
        data: DataSource,
    },
    FitNoise {
        waveguide: WaveguideParams,
        branch: NoiseBranch,
        bandwidth_ghz: f64,
        data: DataSource,
        linear_points: usize,
    },
}

/// A validated scenario ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    plan: Plan,
    resolved: Resolved,
}

/// Line chart to draw from a CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub x: &'static str,
    pub ys: Vec<&'static str>,
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: Vec<u8>,
    pub plot: Option<PlotSpec>,
}

fn csv_artifact(
    file: &str,
    header: &str,
    rows: impl IntoIterator<Item = String>,
    plot: Option<PlotSpec>,
) -> Artifact {
    let mut text = format!("{header}\n");
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    Artifact {
        file: file.to_owned(),
        contents: text.into_bytes(),
        plot,
    }
}

fn plot(title: &str, x: &'static str, ys: &[&'static str]) -> Option<PlotSpec> {
    Some(PlotSpec {
        title: title.to_owned(),
        x,
        ys: ys.to_vec(),
    })
}

/// Outputs of a run plus a short human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub summary: String,
}

fn pump_axis(r: &mut Resolver, section: &str, default_list: &str) -> Vec<f64> {
    if ["pump_start", "pump_stop", "points"]
        .iter()
        .any(|k| r.has(section, k))
    {
        let start = r.quantity(section, "pump_start", W, "0 W", Bound::NonNegative);
        let stop = r.quantity(section, "pump_stop", W, "1 W", Bound::NonNegative);
        let n = r.integer(section, "points", "2", 2);
        if stop <= start {
            r.report(section, "pump_stop", "must exceed pump_start");
        }
        (0..n)
            .map(|i| start + (stop - start) * i as f64 / (n - 1) as f64)
            .collect()
    } else {
        r.quantity_list(section, "pump_power", W, default_list, Bound::NonNegative)
    }
}

fn whole_ns(r: &mut Resolver, section: &str, key: &str, default: &str) -> u64 {
    let v = r.quantity(section, key, NS, default, Bound::Positive);
    if v.fract() != 0.0 {
        r.report(
            section,
            key,
            format!("{v} ns is not a whole number of nanoseconds"),
        );
    }
    v as u64
}

fn waveguide(r: &mut Resolver, with_noise: bool) -> WaveguideParams {
    let nominal = WaveguideParams::nominal();
    WaveguideParams {
        length_cm: r.quantity("waveguide", "length", CM, "1.4 cm", Bound::Positive),
        eta_max: r.fraction("waveguide", "eta_max", "0.95", Bound::Fraction),
        eta_n: r.quantity(
            "waveguide",
            "eta_n",
            ETA_N,
            "0.861 /W/cm^2",
            Bound::Positive,
        ),
        alpha_n: if with_noise {
            r.quantity(
                "waveguide",
                "alpha_n",
                ALPHA_N,
                "76 kHz/mW/cm/THz",
                Bound::NonNegative,
            )
        } else {
            nominal.alpha_n
        },
    }
}

struct ArmDefaults {
    bandwidth: &'static str,
    filter: &'static str,
    extra: &'static str,
    fiber: &'static str,
    efficiency: &'static str,
    dark: &'static str,
    single_mode: &'static str,
}

fn arm(r: &mut Resolver, section: &str, d: ArmDefaults) -> ArmSpec {
    ArmSpec {
        filter: FilterSpec {
            bandwidth_ghz: r.quantity(
                section,
                "filter_bandwidth",
                GHZ,
                d.bandwidth,
                Bound::Positive,
            ),
            transmission: r.fraction(
                section,
                "filter_transmission",
                d.filter,
                Bound::Transmission,
            ),
        },
        extra_filter_transmission: r.fraction(
            section,
            "extra_filter_transmission",
            d.extra,
            Bound::Transmission,
        ),
        fiber_coupling: r.fraction(section, "fiber_coupling", d.fiber, Bound::Transmission),
        detector: DetectorParams {
            efficiency: r.fraction(
                section,
                "detector_efficiency",
                d.efficiency,
                Bound::Fraction,
            ),
            dark_rate_hz: r.quantity(section, "dark_rate", HZ, d.dark, Bound::NonNegative),
        },
        single_mode: r.flag(section, "single_mode", d.single_mode),
    }
}

/// The full pair-source chain. Every default reproduces
/// [`ChainParams::nominal`].
fn chain(r: &mut Resolver) -> ChainParams {
    let waveguide = waveguide(r, true);
    let source = SourceParams {
        mean_pairs_per_cell: r.number(
            "source",
            "mean_pairs_per_cell",
            "1.87e-3",
            Bound::NonNegative,
        ),
        background_modes: r
            .integer("source", "background_modes", "7", 0)
            .min(u32::MAX as u64) as u32,
        cell_length_ns: r.quantity("source", "cell_length", NS, "120.9 ns", Bound::Positive),
        herald_chain_transmission: r.fraction(
            "source",
            "herald_transmission",
            "0.724",
            Bound::Fraction,
        ),
        signal_chain_transmission: r.fraction(
            "source",
            "signal_transmission",
            "0.25",
            Bound::Fraction,
        ),
    };
    let signal_transmission = r.fraction("input", "signal_transmission", "93 %", Bound::Fraction);
    let waveguide_coupling = r.fraction("input", "waveguide_coupling", "57 %", Bound::Fraction);
    let herald_detector = DetectorParams {
        efficiency: r.fraction("herald_detector", "efficiency", "10 %", Bound::Fraction),
        dark_rate_hz: r.quantity(
            "herald_detector",
            "dark_rate",
            HZ,
            "400 Hz",
            Bound::NonNegative,
        ),
    };
    let converted = arm(
        r,
        "converted",
        ArmDefaults {
            bandwidth: "210 MHz",
            filter: "95 %",
            extra: "65 %",
            fiber: "79 %",
            efficiency: "10 %",
            dark: "10 Hz",
            single_mode: "true",
        },
    );
    let unconverted = arm(
        r,
        "unconverted",
        ArmDefaults {
            bandwidth: "10 GHz",
            filter: "90 %",
            extra: "75 %",
            fiber: "79 %",
            efficiency: "60 %",
            dark: "100 Hz",
            single_mode: "false",
        },
    );
    ChainParams {
        source,
        waveguide,
        signal_transmission,
        waveguide_coupling,
        herald_detector,
        converted,
        unconverted,
    }
}

fn sweep_settings(r: &mut Resolver, default_duration: &str) -> SweepSettings {
    let window_ns = whole_ns(r, "analysis", "window", "400 ns");
    let duration_s = r.quantity("analysis", "duration", S, default_duration, Bound::Positive);
    let chunk_s = r.quantity("analysis", "chunk", S, "20 s", Bound::Positive);
    let convention: WindowConvention = r.choice("analysis", "convention", "herald-aligned");
    SweepSettings {
        window_ns,
        duration_s,
        chunk_s,
        convention,
    }
}

fn fit_data(r: &mut Resolver, base_dir: &Path, efficiency: bool) -> DataSource {
    if let Some(path) = r.optional_path("data", "file", base_dir) {
        return DataSource::File(path);
    }
    if efficiency {
        DataSource::SyntheticEfficiency {
            pump_max_w: r.quantity("data", "pump_max", W, "530 mW", Bound::Positive),
            points: r.integer("data", "points", "25", 3) as usize,
            relative_noise: r.fraction("data", "noise", "1 %", Bound::NonNegative),
        }
    } else {
        DataSource::SyntheticNoise {
            pumps_mw: r.quantity_list(
                "data",
                "pump_power",
                MW,
                "25 mW, 50 mW, 75 mW, 150 mW, 250 mW, 350 mW, 450 mW, 530 mW",
                Bound::NonNegative,
            ),
            counting_time_s: r.quantity("data", "counting_time", S, "10 s", Bound::Positive),
        }
    }
}

fn plan(name: &str, r: &mut Resolver, base_dir: &Path) -> Plan {
    match name {
        "fig2a-efficiency" => {
            let pumps = pump_axis(r, "sweep", "0 W, 0.53 W, 1.45 W");
            let waveguide = waveguide(r, false);
            let losses = LossBudget {
                signal_transmission: r.fraction(
                    "losses",
                    "signal_transmission",
                    "93 %",
                    Bound::Fraction,
                ),
                waveguide_coupling: r.fraction(
                    "losses",
                    "waveguide_coupling",
                    "57 %",
                    Bound::Fraction,
                ),
                filter_transmission: r.fraction(
                    "losses",
                    "filter_transmission",
                    "62 %",
                    Bound::Fraction,
                ),
                fiber_coupling: r.fraction("losses", "fiber_coupling", "79 %", Bound::Fraction),
            };
            Plan::EfficiencyCurve {
                waveguide,
                losses,
                pumps,
            }
        }
        "fig2b-mu1" => {
            let pumps = r.quantity_list("sweep", "pump_power", W, "500 mW", Bound::Positive);
            let chain = chain(r);
            let means = r.number_list(
                "wcs",
                "mean_photons",
                "0.04, 0.1, 0.2, 0.5, 1",
                Bound::Positive,
            );
            let wcs = WcsParams {
                mean_photons_per_pulse: 1.0,
                pulse_fwhm_ns: r.quantity("wcs", "pulse_fwhm", NS, "200 ns", Bound::Positive),
                repetition_period_ns: r.quantity("wcs", "period", NS, "10 us", Bound::Positive),
            };
            let pulses = r.integer("wcs", "pulses", "100000", 1);
            let window_ns = whole_ns(r, "analysis", "window", "400 ns");
            let guard_ns = r.quantity("analysis", "guard", NS, "200 ns", Bound::NonNegative) as u64;
            if (window_ns + 2 * guard_ns) as f64 >= wcs.repetition_period_ns {
                r.report(
                    "analysis",
                    "guard",
                    "window plus guard leave no background in the pulse period",
                );
            }
            if let Err(e) = wcs.validate() {
                r.report("wcs", "pulse_fwhm", e.to_string());
            }
            let (lo, hi) = means.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &m| {
                (lo.min(m), hi.max(m))
            });
            if means.len() < 2 || hi < 5.0 * lo {
                r.report(
                    "wcs",
                    "mean_photons",
                    "need >= 2 values spanning at least a factor 5",
                );
            }
            Plan::Mu1Sweep {
                chain,
                wcs,
                means,
                pulses,
                window_ns,
                guard_ns,
                pumps,
            }
        }
        "fig3-noise" => {
            let pumps = pump_axis(r, "sweep", "0 W, 0.5 W, 1 W, 1.5 W");
            Plan::NoiseSweep {
                waveguide: waveguide(r, true),
                telecom_bandwidth_ghz: r.quantity(
                    "noise",
                    "telecom_bandwidth",
                    GHZ,
                    "210 MHz",
                    Bound::Positive,
                ),
                visible_bandwidth_ghz: r.quantity(
                    "noise",
                    "visible_bandwidth",
                    GHZ,
                    "10 GHz",
                    Bound::Positive,
                ),
                counting_time_s: r.quantity("noise", "counting_time", S, "10 s", Bound::Positive),
                pumps,
            }
        }
        "fig4a-correlations" => {
            let pumps = pump_axis(r, "sweep", "0 mW, 250 mW, 500 mW");
            Plan::Correlations {
                chain: chain(r),
                settings: sweep_settings(r, "120 s"),
                pumps,
            }
        }
        "fig4b-heralded-g2" => {
            let pump_w = r.quantity("measurement", "pump_power", W, "250 mW", Bound::NonNegative);
            let chain = chain(r);
            let settings = sweep_settings(r, "3000 s");
            let events: EventFormat = r.choice("output", "events", "none");
            let event_duration_s = if events == EventFormat::None {
                0.0
            } else {
                r.quantity("output", "event_duration", S, "1 s", Bound::Positive)
            };
            Plan::HeraldedG2 {
                chain,
                settings,
                pump_w,
                events,
                event_duration_s,
            }
        }
        "fit-efficiency" => Plan::FitEfficiency {
            waveguide: waveguide(r, false),
            data: fit_data(r, base_dir, true),
        },
        "fit-noise" => {
            let waveguide = waveguide(r, true);
            let branch: Branch = r.choice("noise", "branch", "telecom");
            let bandwidth_ghz = r.quantity("noise", "bandwidth", GHZ, "210 MHz", Bound::Positive);
            let data = fit_data(r, base_dir, false);
            let linear_points = r.integer("fit", "linear_points", "3", 2) as usize;
            if let DataSource::SyntheticNoise { pumps_mw, .. } = &data {
                if linear_points > pumps_mw.len() {
                    r.report(
                        "fit",
                        "linear_points",
                        format!("exceeds the {} pump powers", pumps_mw.len()),
                    );
                }
            }
            Plan::FitNoise {
                waveguide,
                branch: branch.0,
                bandwidth_ghz,
                data,
                linear_points,
            }
        }
        _ => unreachable!("scenario names are checked before planning"),
    }
}

impl Scenario {
    /// Validates `raw` completely. Relative data paths are taken from
    /// `base_dir`.
    pub fn resolve(raw: &RawConfig, base_dir: &Path) -> Result<Scenario, Vec<Diagnostic>> {
        let mut r = Resolver::new(raw);
        let name = r.optional_text("scenario", "name");
        let seed = r.required_integer("scenario", "seed");
        let Some(name) = name else {
            r.report(
                "scenario",
                "name",
                "required value is missing; `qfcsim list` shows the builtin names",
            );
            return Err(r.abort());
        };
        if builtin(&name).is_none() {
            r.report(
                "scenario",
                "name",
                format!("unknown scenario `{name}`; `qfcsim list` shows the builtin names"),
            );
            return Err(r.abort());
        }
        let plan = plan(&name, &mut r, base_dir);
        let chain = match &plan {
            Plan::Mu1Sweep { chain, .. }
            | Plan::Correlations { chain, .. }
            | Plan::HeraldedG2 { chain, .. } => Some(chain),
            _ => None,
        };
        if let Some(Err(e)) = chain.map(ChainParams::validate) {
            r.report_general(e.to_string());
        }
        let resolved = r.finish()?;
        Ok(Scenario {
            name,
            seed: seed.expect("a missing seed is a diagnostic"),
            plan,
            resolved,
        })
    }

    /// Configuration text with every value the scenario uses.
    pub fn resolved_config(&self) -> String {
        self.resolved.render()
    }

    /// Runs the scenario. Sweep points run in parallel on the current rayon
    /// pool; results do not depend on the number of threads.
    pub fn run(&self) -> qfc_core::Result<RunOutput> {
        match &self.plan {
            Plan::EfficiencyCurve {
                waveguide,
                losses,
                pumps,
            } => run_efficiency_curve(waveguide, losses, pumps),
            Plan::Mu1Sweep {
                chain,
                wcs,
                means,
                pulses,
                window_ns,
                guard_ns,
                pumps,
            } => run_mu1_sweep(
                chain, wcs, means, *pulses, *window_ns, *guard_ns, pumps, self.seed,
            ),
            Plan::NoiseSweep {
                waveguide,
                telecom_bandwidth_ghz,
                visible_bandwidth_ghz,
                counting_time_s,
                pumps,
            } => run_noise_sweep(
                waveguide,
                *telecom_bandwidth_ghz,
                *visible_bandwidth_ghz,
                *counting_time_s,
                pumps,
                self.seed,
            ),
            Plan::Correlations {
                chain,
                settings,
                pumps,
            } => run_correlations(chain, settings, pumps, self.seed),
            Plan::HeraldedG2 {
                chain,
                settings,
                pump_w,
                events,
                event_duration_s,
            } => run_heralded(
                chain,
                settings,
                *pump_w,
                *events,
                *event_duration_s,
                self.seed,
            ),
            Plan::FitEfficiency { waveguide, data } => {
                run_fit_efficiency(waveguide, data, self.seed)
            }
            Plan::FitNoise {
                waveguide,
                branch,
                bandwidth_ghz,
                data,
                linear_points,
            } => run_fit_noise(
                waveguide,
                *branch,
                *bandwidth_ghz,
                data,
                *linear_points,
                self.seed,
            ),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (seed {})", self.name, self.seed)
    }
}

fn sorted(pumps: &[f64]) -> Vec<f64> {
    let mut p = pumps.to_vec();
    p.sort_by(f64::total_cmp);
    p
}

fn run_efficiency_curve(
    wg: &WaveguideParams,
    losses: &LossBudget,
    pumps: &[f64],
) -> qfc_core::Result<RunOutput> {
    let rows = pumps
        .iter()
        .map(|&p| {
            Ok(format!(
                "{p},{},{}",
                internal_efficiency(p, wg)?,
                device_efficiency(p, wg, losses)?
            ))
        })
        .collect::<qfc_core::Result<Vec<_>>>()?;
    let p_star = wg.first_maximum_power();
    Ok(RunOutput {
        artifacts: vec![csv_artifact(
            "efficiency.csv",
            "pump_w,internal_efficiency,device_efficiency",
            rows,
            plot(
                "Conversion efficiency",
                "pump_w",
                &["internal_efficiency", "device_efficiency"],
            ),
        )],
        summary: format!(
            "efficiency maximum at {p_star:.4} W: internal {:.4}, device {:.4}",
            internal_efficiency(p_star, wg)?,
            device_efficiency(p_star, wg, losses)?
        ),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_mu1_sweep(
    chain: &ChainParams,
    wcs: &WcsParams,
    means: &[f64],
    pulses: u64,
    window_ns: u64,
    guard_ns: u64,
    pumps: &[f64],
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let pumps = sorted(pumps);
    let points = pumps
        .par_iter()
        .map(|&p| {
            wcs_mu1_point(
                chain,
                wcs,
                means,
                pulses,
                p,
                window_ns,
                guard_ns,
                sweep_point_seed(seed, p),
            )
        })
        .collect::<qfc_core::Result<Vec<_>>>()?;
    let mut snr_rows = Vec::new();
    let mut mu1_rows = Vec::new();
    for point in &points {
        for (mean, m) in &point.measurements {
            snr_rows.push(format!(
                "{},{mean},{},{},{},{}",
                point.pump_w, m.signal_per_pulse, m.noise_per_window, m.snr, m.pulses
            ));
        }
        let model = chain.converted_mu1(point.pump_w, window_ns as f64 * 1e-9)?;
        let e = &point.estimate;
        mu1_rows.push(format!(
            "{},{},{},{model},{}",
            point.pump_w, e.mu1, e.std_error, e.slope
        ));
    }
    let summary = points
        .iter()
        .map(|p| {
            format!(
                "P = {} W: mu1 = {:.3e} ± {:.1e}",
                p.pump_w, p.estimate.mu1, p.estimate.std_error
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RunOutput {
        artifacts: vec![
            csv_artifact(
                "snr.csv",
                "pump_w,mean_photons,signal_per_pulse,noise_per_window,snr,pulses",
                snr_rows,
                None,
            ),
            csv_artifact(
                "mu1.csv",
                "pump_w,mu1,mu1_std_error,mu1_model,snr_per_photon",
                mu1_rows,
                plot("mu1 vs pump power", "pump_w", &["mu1", "mu1_model"]),
            ),
        ],
        summary,
    })
}

fn run_noise_sweep(
    wg: &WaveguideParams,
    telecom_bw: f64,
    visible_bw: f64,
    counting_time_s: f64,
    pumps: &[f64],
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let pumps = sorted(pumps);
    let pumps_mw: Vec<f64> = pumps.iter().map(|p| p * 1e3).collect();
    let mut artifacts = Vec::new();
    for (file, label, branch, bw) in [
        (
            "noise_telecom.csv",
            "Telecom noise",
            NoiseBranch::Converted,
            telecom_bw,
        ),
        (
            "noise_backconverted.csv",
            "Back-converted noise",
            NoiseBranch::Unconverted,
            visible_bw,
        ),
    ] {
        let measured = synthetic_noise_data(
            wg,
            branch,
            bw,
            &pumps_mw,
            counting_time_s,
            derive_seed(seed, file),
        )?;
        let rows = pumps
            .iter()
            .zip(measured.points())
            .map(|(&p, m)| {
                Ok(format!(
                    "{p},{},{},{},{}",
                    noise_model_rate(branch, m.x, wg, bw)?,
                    wg.linear_noise_rate(p) * bw,
                    m.y,
                    m.sigma.unwrap_or(0.0)
                ))
            })
            .collect::<qfc_core::Result<Vec<_>>>()?;
        artifacts.push(csv_artifact(
            file,
            "pump_w,model_hz,linear_hz,measured_hz,measured_err",
            rows,
            plot(label, "pump_w", &["model_hz", "linear_hz", "measured_hz"]),
        ));
    }
    let top = *pumps.last().unwrap_or(&0.0);
    let summary = if top > 0.0 {
        let saturation = wg.linear_noise_rate(top) * telecom_bw
            / noise_model_rate(NoiseBranch::Converted, top * 1e3, wg, telecom_bw)?;
        format!("telecom noise at {top} W is {saturation:.3}× below the linear extrapolation")
    } else {
        String::new()
    };
    Ok(RunOutput { artifacts, summary })
}

fn run_correlations(
    chain: &ChainParams,
    settings: &SweepSettings,
    pumps: &[f64],
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let pumps = sorted(pumps);
    let rows: Vec<SweepRow> = pumps
        .par_iter()
        .map(|&p| g2_sweep_point(chain, p, settings, sweep_point_seed(seed, p)))
        .collect::<qfc_core::Result<_>>()?;
    let summary = rows
        .iter()
        .map(|r| {
            let g = |x: &Option<qfc_core::coincidence_analysis::G2Result>| {
                x.map(|g| format!("{:.2} ± {:.2}", g.value, g.std_error))
                    .unwrap_or_else(|| "-".into())
            };
            format!(
                "P = {} W: converted {}, unconverted {}",
                r.pump_w,
                g(&r.g2_converted),
                g(&r.g2_unconverted)
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RunOutput {
        artifacts: vec![csv_artifact(
            "g2_sweep.csv",
            SweepRow::CSV_HEADER,
            rows.iter().map(SweepRow::csv_fields),
            plot(
                "Cross-correlation vs pump power",
                "pump_w",
                &["g2_converted", "g2_unconverted", "g2_predicted"],
            ),
        )],
        summary,
    })
}

fn run_heralded(
    chain: &ChainParams,
    settings: &SweepSettings,
    pump_w: f64,
    events: EventFormat,
    event_duration_s: f64,
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let g: HeraldedG2 = heralded_g2_point(chain, pump_w, settings, seed)?;
    let mut histogram = Vec::new();
    g.histogram().write_csv(&mut histogram)?;
    let mut artifacts = vec![
        csv_artifact(
            "heralded_g2.csv",
            &format!("pump_w,{}", HeraldedG2::CSV_HEADER),
            [format!("{pump_w},{}", g.csv_fields())],
            None,
        ),
        Artifact {
            file: "triple_histogram.csv".into(),
            contents: histogram,
            plot: plot("Triple coincidences", "bin", &["count"]),
        },
    ];
    if events != EventFormat::None {
        let run = chain.simulate(
            pump_w,
            event_duration_s,
            derive_seed(seed, "events"),
            Arms::OUTPUTS,
        )?;
        let streams = [
            ("herald", &run.herald),
            ("converted", run.converted.as_ref().expect("requested")),
            ("unconverted", run.unconverted.as_ref().expect("requested")),
        ];
        for (name, stream) in streams {
            let mut bytes = Vec::new();
            let ext = match events {
                EventFormat::Csv => {
                    io::write_csv(stream, &mut bytes)?;
                    "csv"
                }
                _ => {
                    io::write_binary(stream, &mut bytes)?;
                    "bin"
                }
            };
            artifacts.push(Artifact {
                file: format!("events_{name}.{ext}"),
                contents: bytes,
                plot: None,
            });
        }
    }
    Ok(RunOutput {
        artifacts,
        summary: format!(
            "heralded g2 at {pump_w} W: {:.3} ± {:.3}",
            g.value, g.std_error
        ),
    })
}

fn load(
    data: &DataSource,
    synthetic: impl FnOnce(&DataSource) -> qfc_core::Result<Dataset>,
) -> qfc_core::Result<Dataset> {
    match data {
        DataSource::File(path) => {
            let file = File::open(path)
                .map_err(|e| qfc_core::Error::Io(format!("{}: {e}", path.display())))?;
            Dataset::read_csv(file)
        }
        other => synthetic(other),
    }
}

fn dataset_artifact(data: &Dataset) -> qfc_core::Result<Artifact> {
    let mut bytes = Vec::new();
    data.write_csv(&mut bytes)?;
    Ok(Artifact {
        file: "data.csv".into(),
        contents: bytes,
        plot: None,
    })
}

fn run_fit_efficiency(
    wg: &WaveguideParams,
    data: &DataSource,
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let data = load(data, |d| match d {
        DataSource::SyntheticEfficiency {
            pump_max_w,
            points,
            relative_noise,
        } => synthetic_efficiency_data(
            wg,
            *pump_max_w,
            *points,
            *relative_noise,
            derive_seed(seed, "data"),
        ),
        _ => unreachable!(),
    })?;
    let fit: FitResult = fit_efficiency_curve(&data, wg.length_cm, None)?;
    let fitted = WaveguideParams {
        eta_max: fit.parameters[0],
        eta_n: fit.parameters[1],
        ..*wg
    };
    let rows = data
        .points()
        .iter()
        .map(|pt| {
            let model = internal_efficiency(pt.x, &fitted)?;
            Ok(format!("{},{},{model},{}", pt.x, pt.y, pt.y - model))
        })
        .collect::<qfc_core::Result<Vec<_>>>()?;
    let mut fit_csv = Vec::new();
    fit.write_csv(&mut fit_csv)?;
    Ok(RunOutput {
        artifacts: vec![
            dataset_artifact(&data)?,
            Artifact {
                file: "fit.csv".into(),
                contents: fit_csv,
                plot: None,
            },
            csv_artifact(
                "curve.csv",
                "pump_w,measured,model,residual",
                rows,
                plot("Efficiency fit", "pump_w", &["measured", "model"]),
            ),
        ],
        summary: fit.report().trim_end().to_owned(),
    })
}

fn run_fit_noise(
    wg: &WaveguideParams,
    branch: NoiseBranch,
    bw: f64,
    data: &DataSource,
    linear_points: usize,
    seed: u64,
) -> qfc_core::Result<RunOutput> {
    let data = load(data, |d| match d {
        DataSource::SyntheticNoise {
            pumps_mw,
            counting_time_s,
        } => synthetic_noise_data(
            wg,
            branch,
            bw,
            pumps_mw,
            *counting_time_s,
            derive_seed(seed, "data"),
        ),
        _ => unreachable!(),
    })?;
    let model = fit_noise_model(&data, wg, branch, bw)?;
    let linear = fit_noise_slope(&data, linear_points, wg.length_cm, bw)?;
    let fitted = WaveguideParams {
        alpha_n: model.alpha_n,
        ..*wg
    };
    let rows = data
        .points()
        .iter()
        .map(|pt| {
            Ok(format!(
                "{},{},{},{},{}",
                pt.x,
                pt.y,
                pt.sigma.map(|s| s.to_string()).unwrap_or_default(),
                noise_model_rate(branch, pt.x, &fitted, bw)?,
                linear.alpha_n * pt.x * wg.length_cm * bw / 1e3
            ))
        })
        .collect::<qfc_core::Result<Vec<_>>>()?;
    let unit = "Hz/mW/cm/THz";
    Ok(RunOutput {
        artifacts: vec![
            dataset_artifact(&data)?,
            csv_artifact(
                "fit.csv",
                FitResult::CSV_HEADER,
                [
                    format!("alpha_n,{},{},{unit}", model.alpha_n, model.std_error),
                    format!("alpha_n_linear,{},{},{unit}", linear.alpha_n, linear.std_error),
                ],
                None,
            ),
            csv_artifact(
                "curve.csv",
                "pump_mw,measured_hz,measured_err,model_hz,linear_hz",
                rows,
                plot("Noise fit", "pump_mw", &["measured_hz", "model_hz", "linear_hz"]),
            ),
        ],
        summary: format!(
            "alpha_n = {:.4e} ± {:.1e} {unit} (model), {:.4e} ± {:.1e} (first {linear_points} points)",
            model.alpha_n, model.std_error, linear.alpha_n, linear.std_error
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve_text(text: &str) -> Result<Scenario, Vec<Diagnostic>> {
        Scenario::resolve(&RawConfig::parse(text).unwrap(), Path::new("/tmp"))
    }

    #[test]
    fn builtins_resolve_and_are_unique() {
        assert!(SCENARIOS.len() >= 7);
        for (i, s) in SCENARIOS.iter().enumerate() {
            assert!(
                SCENARIOS[..i].iter().all(|t| t.name != s.name),
                "{}",
                s.name
            );
            let scenario = resolve_text(s.config).unwrap_or_else(|d| panic!("{}: {d:?}", s.name));
            assert_eq!(scenario.name, s.name);
        }
    }

    #[test]
    fn chain_defaults_match_nominal() {
        let sc = resolve_text(builtin("fig4a-correlations").unwrap().config).unwrap();
        let Plan::Correlations {
            chain, settings, ..
        } = sc.plan
        else {
            panic!()
        };
        assert_eq!(chain, ChainParams::nominal());
        assert_eq!(settings.window_ns, 400);
    }

    #[test]
    fn resolved_config_round_trips() {
        for s in SCENARIOS {
            let a = resolve_text(s.config).unwrap();
            let b = resolve_text(&a.resolved_config()).unwrap();
            assert_eq!(a, b, "{}", s.name);
            assert_eq!(a.resolved_config(), b.resolved_config());
        }
    }

    #[test]
    fn diagnostics_name_fields() {
        let d = resolve_text("[scenario]\nname = fig2a-efficiency\n[sweep]\npump_power = -5 mW\n")
            .unwrap_err();
        let text: Vec<String> = d.iter().map(ToString::to_string).collect();
        assert!(
            text.iter()
                .any(|t| t.contains("sweep.pump_power") && t.contains("-5 mW must be >= 0")),
            "{text:?}"
        );
        assert!(
            text.iter()
                .any(|t| t.contains("scenario.seed") && t.contains("missing")),
            "{text:?}"
        );

        let d = resolve_text("[scenario]\nname = fig9\nseed = 1\n").unwrap_err();
        assert!(d[0].message.contains("unknown scenario"));
        let d = resolve_text(
            "[scenario]\nname = fig4a-correlations\nseed = 1\n[analysis]\nwindow = 400\n",
        )
        .unwrap_err();
        assert_eq!(d[0].line, Some(5));
        let d = resolve_text(
            "[scenario]\nname = fig4a-correlations\nseed = 1\n[analysis]\nwindow = 400.5 ns\n",
        )
        .unwrap_err();
        assert!(d[0].message.contains("whole number"));
        let d = resolve_text("[scenario]\nname = fit-noise\nseed = 1\n[noise]\nbranch = red\n")
            .unwrap_err();
        assert!(d[0].message.contains("unknown branch"));
    }

    #[test]
    fn efficiency_curve_is_the_model() {
        let sc = resolve_text(builtin("fig2a-efficiency").unwrap().config).unwrap();
        let out = sc.run().unwrap();
        let text = String::from_utf8(out.artifacts[0].contents.clone()).unwrap();
        let wg = WaveguideParams::nominal();
        let losses = LossBudget::nominal();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("pump_w,internal_efficiency,device_efficiency")
        );
        let mut n = 0;
        for line in lines {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert!((v[1] - internal_efficiency(v[0], &wg).unwrap()).abs() <= 1e-12);
            assert!((v[2] - device_efficiency(v[0], &wg, &losses).unwrap()).abs() <= 1e-12);
            n += 1;
        }
        assert_eq!(n, 161);
    }

    #[test]
    fn fits_run_on_synthetic_data() {
        let out = resolve_text(builtin("fit-efficiency").unwrap().config)
            .unwrap()
            .run()
            .unwrap();
        let files: Vec<&str> = out.artifacts.iter().map(|a| a.file.as_str()).collect();
        assert_eq!(files, ["data.csv", "fit.csv", "curve.csv"]);
        assert!(out.summary.contains("eta_max"));
        let out = resolve_text(builtin("fit-noise").unwrap().config)
            .unwrap()
            .run()
            .unwrap();
        let fit = String::from_utf8(out.artifacts[1].contents.clone()).unwrap();
        let alpha: f64 = fit
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(1)
            .unwrap()
            .parse()
            .unwrap();
        assert!((alpha / 76_000.0 - 1.0).abs() < 0.03, "{alpha}");
    }
}
