//! Scenario runner for the frequency-conversion simulator.
//!
//! `qfcsim list` shows the builtin scenarios, `qfcsim validate` checks a
//! configuration and `qfcsim run` executes one, writing one CSV per measured
//! quantity plus a manifest that re-runs it. Exit codes: 0 ok,
//! 1 invalid configuration or usage, 2 runtime failure.

pub mod config;
pub mod output;
pub mod plot;
pub mod scenario;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{Diagnostic, RawConfig};
use scenario::{builtin, Scenario, SCENARIOS};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}", format_diagnostics(.source_name, .diagnostics))]
    Validation {
        source_name: String,
        diagnostics: Vec<Diagnostic>,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{} already holds outputs of scenario `{existing}`", .dir.display())]
    OutputConflict { dir: PathBuf, existing: String },
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Run(#[from] qfc_core::Error),
}

fn format_diagnostics(source: &str, diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(|d| format!("{source}: {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } | CliError::Usage(_) | CliError::OutputConflict { .. } => 1,
            CliError::Io(_) | CliError::Run(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "qfcsim",
    version,
    about = "Quantum frequency conversion simulator and analysis runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Target {
    /// Builtin scenario name (see `qfcsim list`).
    scenario: Option<String>,
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        #[command(flatten)]
        target: Target,
        /// Output directory [default: out/<scenario>].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write an SVG line chart per CSV.
        #[arg(long)]
        plot: bool,
        /// Worker threads for sweep points [default: all cores].
        #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
        parallel: Option<u64>,
    },
    /// List the builtin scenarios.
    List,
    /// Check a configuration without running it.
    Validate {
        #[command(flatten)]
        target: Target,
    },
}

/// Config text, a name for diagnostics and the directory relative data
/// paths are taken from.
fn load_target(target: &Target) -> Result<(String, String, PathBuf), CliError> {
    match (&target.scenario, &target.config) {
        (Some(_), Some(_)) => Err(CliError::Usage(
            "give either a scenario name or --config, not both".into(),
        )),
        (None, None) => Err(CliError::Usage(
            "give a scenario name or --config PATH".into(),
        )),
        (Some(name), None) => {
            let info = builtin(name).ok_or_else(|| {
                CliError::Usage(format!("unknown scenario `{name}`; see `qfcsim list`"))
            })?;
            let cwd = std::env::current_dir().map_err(|e| CliError::Io(e.to_string()))?;
            Ok((info.config.to_owned(), format!("<builtin {name}>"), cwd))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let base = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            let base = base.canonicalize().unwrap_or(base);
            Ok((text, path.display().to_string(), base))
        }
    }
}

/// Parses and fully validates a configuration.
pub fn resolve_config(
    text: &str,
    source_name: &str,
    base_dir: &Path,
    seed: Option<u64>,
) -> Result<Scenario, CliError> {
    let invalid = |diagnostics| CliError::Validation {
        source_name: source_name.to_owned(),
        diagnostics,
    };
    let mut raw = RawConfig::parse(text).map_err(invalid)?;
    if let Some(seed) = seed {
        raw.set("scenario", "seed", &seed.to_string());
    }
    Scenario::resolve(&raw, base_dir).map_err(invalid)
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let print = |out: &mut dyn Write, s: &str| {
        writeln!(out, "{s}").map_err(|e| CliError::Io(e.to_string()))
    };
    match cli.command {
        Command::List => {
            for s in SCENARIOS {
                print(out, &format!("{:<20} {}", s.name, s.description))?;
            }
            Ok(())
        }
        Command::Validate { target } => {
            let (text, name, base) = load_target(&target)?;
            let scenario = resolve_config(&text, &name, &base, None)?;
            print(out, &format!("{name}: ok ({scenario})"))
        }
        Command::Run {
            target,
            out: out_dir,
            seed,
            plot,
            parallel,
        } => {
            let (text, name, base) = load_target(&target)?;
            let scenario = resolve_config(&text, &name, &base, seed)?;
            let threads = parallel.map_or(0, |n| n as usize);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            let result = pool.install(|| scenario.run())?;
            let dir = out_dir.unwrap_or_else(|| Path::new("out").join(&scenario.name));
            let written = output::write_outputs(&dir, &scenario, &result, plot)?;
            if !result.summary.is_empty() {
                print(out, &result.summary)?;
            }
            for path in written {
                print(out, &format!("wrote {}", path.display()))?;
            }
            Ok(())
        }
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code. Normal output goes to `out`, errors to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
