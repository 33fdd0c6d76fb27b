//! Writing run outputs: every file goes to a temporary name first and is
//! renamed into place, and the manifest is written last.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::plot::{render_svg, Chart};
use crate::scenario::{RunOutput, Scenario};
use crate::CliError;

pub const MANIFEST: &str = "manifest.txt";

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Scenario recorded in an existing manifest, if any.
fn manifest_scenario(dir: &Path) -> Option<String> {
    let text = fs::read_to_string(dir.join(MANIFEST)).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("# scenario: "))
        .map(str::to_owned)
}

/// Manifest text: a header of comments followed by the resolved
/// configuration, so the manifest itself re-runs the scenario.
pub fn manifest(scenario: &Scenario, files: &[String]) -> String {
    format!(
        "# qfcsim {}\n# scenario: {}\n# seed: {}\n# outputs: {}\n# re-run with: qfcsim run --config {MANIFEST}\n{}",
        env!("CARGO_PKG_VERSION"),
        scenario.name,
        scenario.seed,
        files.join(", "),
        scenario.resolved_config()
    )
}

/// Writes the outputs of `scenario` into `dir`. A directory that already
/// holds another scenario's outputs is refused.
pub fn write_outputs(
    dir: &Path,
    scenario: &Scenario,
    output: &RunOutput,
    plots: bool,
) -> Result<Vec<PathBuf>, CliError> {
    if let Some(existing) = manifest_scenario(dir) {
        if existing != scenario.name {
            return Err(CliError::OutputConflict {
                dir: dir.to_path_buf(),
                existing,
            });
        }
    }
    let io_err = |path: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut written = Vec::new();
    let mut names = Vec::new();
    for artifact in &output.artifacts {
        let path = dir.join(&artifact.file);
        write_atomic(&path, &artifact.contents).map_err(|e| io_err(&path, e))?;
        names.push(artifact.file.clone());
        written.push(path);
        if !plots {
            continue;
        }
        let Some(spec) = &artifact.plot else { continue };
        let text = String::from_utf8_lossy(&artifact.contents);
        if let Some(chart) = Chart::from_csv(&spec.title, &text, spec.x, &spec.ys) {
            let svg_name = Path::new(&artifact.file).with_extension("svg");
            let path = dir.join(&svg_name);
            write_atomic(&path, render_svg(&chart).as_bytes()).map_err(|e| io_err(&path, e))?;
            names.push(svg_name.display().to_string());
            written.push(path);
        }
    }
    let path = dir.join(MANIFEST);
    write_atomic(&path, manifest(scenario, &names).as_bytes()).map_err(|e| io_err(&path, e))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        let leftovers = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn atomic_write_into_missing_dir_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_atomic(&dir.path().join("no/such/file"), b"x").is_err());
    }
}
