//! Flat `key = value` configuration files with `[section]` headers.
//!
//! Physical quantities carry an explicit unit suffix (`250 mW`, `400 ns`);
//! a bare number is only accepted for dimensionless values. Every problem
//! found is reported with its line and `section.key`, and validation keeps
//! going so that one pass shows all of them.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line in the config file; `None` for values that came from a
    /// default or the command line.
    pub line: Option<usize>,
    /// `section.key`, when the problem belongs to a field.
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: Option<usize>,
}

/// A parsed but untyped configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: Vec<Entry>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, Vec<Diagnostic>> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut diagnostics = Vec::new();
        let mut section: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() || content.starts_with(';') {
                continue;
            }
            let diag = |message: String| Diagnostic {
                line: Some(line),
                field: None,
                message,
            };
            if let Some(rest) = content.strip_prefix('[') {
                match rest.strip_suffix(']').map(str::trim) {
                    Some(name) if is_identifier(name) => section = Some(name.to_owned()),
                    _ => diagnostics.push(diag(format!("malformed section header `{content}`"))),
                }
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                diagnostics.push(diag(format!("expected `key = value`, found `{content}`")));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if !is_identifier(key) {
                diagnostics.push(diag(format!("invalid key `{key}`")));
                continue;
            }
            let Some(section) = section.clone() else {
                diagnostics.push(diag(format!("`{key}` appears before any [section] header")));
                continue;
            };
            let field = Some(format!("{section}.{key}"));
            if value.is_empty() {
                diagnostics.push(Diagnostic {
                    field,
                    ..diag("missing value".into())
                });
                continue;
            }
            if let Some(first) = entries
                .iter()
                .find(|e| e.section == section && e.key == key)
            {
                diagnostics.push(Diagnostic {
                    field,
                    ..diag(format!(
                        "duplicate key, first set on line {}",
                        first.line.unwrap_or(0)
                    ))
                });
                continue;
            }
            entries.push(Entry {
                section,
                key: key.to_owned(),
                value: value.to_owned(),
                line: Some(line),
            });
        }
        if diagnostics.is_empty() {
            Ok(Self { entries })
        } else {
            Err(diagnostics)
        }
    }

    /// Sets or replaces a value from outside the file, e.g. a command-line
    /// override.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.entries
            .retain(|e| !(e.section == section && e.key == key));
        self.entries.push(Entry {
            section: section.to_owned(),
            key: key.to_owned(),
            value: value.to_owned(),
            line: None,
        });
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.section == section && e.key == key)
            .map(|e| e.value.as_str())
    }
}

/// Physical dimension of a configuration value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Base unit W.
    Power,
    /// Base unit s.
    Time,
    /// Base unit Hz.
    Frequency,
    /// Base unit cm.
    Length,
    /// Normalized conversion efficiency, base unit W⁻¹ cm⁻².
    NormalizedEfficiency,
    /// Noise generation coefficient, base unit counts s⁻¹ mW⁻¹ cm⁻¹ THz⁻¹.
    NoiseCoefficient,
}

impl Dim {
    /// Units with their power of ten relative to the base unit.
    fn units(self) -> &'static [(&'static str, i32)] {
        match self {
            Dim::Power => &[("W", 0), ("mW", -3), ("uW", -6), ("µW", -6), ("kW", 3)],
            Dim::Time => &[
                ("s", 0),
                ("ms", -3),
                ("us", -6),
                ("µs", -6),
                ("ns", -9),
                ("ps", -12),
            ],
            Dim::Frequency => &[("Hz", 0), ("kHz", 3), ("MHz", 6), ("GHz", 9), ("THz", 12)],
            Dim::Length => &[("cm", 0), ("mm", -1), ("m", 2), ("um", -4), ("µm", -4)],
            Dim::NormalizedEfficiency => &[("/W/cm^2", 0), ("/W/cm2", 0), ("%/W/cm^2", -2)],
            Dim::NoiseCoefficient => &[("Hz/mW/cm/THz", 0), ("kHz/mW/cm/THz", 3)],
        }
    }

    fn exponent(self, unit: &str) -> Option<i32> {
        self.units().iter().find(|(u, _)| *u == unit).map(|u| u.1)
    }

    fn name(self) -> &'static str {
        match self {
            Dim::Power => "power",
            Dim::Time => "time",
            Dim::Frequency => "frequency",
            Dim::Length => "length",
            Dim::NormalizedEfficiency => "normalized efficiency",
            Dim::NoiseCoefficient => "noise coefficient",
        }
    }

    fn unit_list(self) -> String {
        self.units()
            .iter()
            .map(|u| u.0)
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Splits a leading decimal number from the rest of `text`.
fn split_number(text: &str) -> Result<(f64, &str), String> {
    let t = text.trim();
    let b = t.as_bytes();
    let mut end = 0;
    while end < b.len() {
        let c = b[end];
        let exponent_sign =
            (c == b'+' || c == b'-') && (end == 0 || matches!(b[end - 1], b'e' | b'E'));
        let exponent = (c == b'e' || c == b'E')
            && end > 0
            && b[end - 1].is_ascii_digit()
            && b.get(end + 1)
                .is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
        if !(c.is_ascii_digit() || c == b'.' || exponent_sign || exponent) {
            break;
        }
        end += 1;
    }
    let number: f64 = t[..end]
        .parse()
        .map_err(|_| format!("`{t}` does not start with a number"))?;
    if !number.is_finite() {
        return Err(format!("`{t}` is not finite"));
    }
    Ok((number, t[end..].trim()))
}

/// Parses `number unit` and expresses it in `target`, a unit of `dim`.
/// The conversion is a single multiplication or division by an exact power
/// of ten, so `400 ns` read in ns is exactly 400.
pub fn parse_quantity(text: &str, dim: Dim, target: &str) -> Result<f64, String> {
    let (number, unit) = split_number(text)?;
    if unit.is_empty() {
        return Err(format!(
            "`{}` needs a {} unit ({})",
            text.trim(),
            dim.name(),
            dim.unit_list()
        ));
    }
    let from = dim.exponent(unit).ok_or_else(|| {
        format!(
            "unknown {} unit `{unit}`; expected one of {}",
            dim.name(),
            dim.unit_list()
        )
    })?;
    let to = dim
        .exponent(target)
        .expect("target unit belongs to the dimension");
    let shift = from - to;
    let factor = 10f64.powi(shift.abs());
    Ok(if shift >= 0 {
        number * factor
    } else {
        number / factor
    })
}

/// A plain number or a percentage.
pub fn parse_fraction(text: &str) -> Result<f64, String> {
    match split_number(text)? {
        (n, "") => Ok(n),
        (n, "%") => Ok(n / 100.0),
        (_, unit) => Err(format!("unexpected unit `{unit}` on a dimensionless value")),
    }
}

pub fn parse_number(text: &str) -> Result<f64, String> {
    match split_number(text)? {
        (n, "") => Ok(n),
        (_, unit) => Err(format!("unexpected unit `{unit}` on a dimensionless value")),
    }
}

pub fn parse_integer(text: &str) -> Result<u64, String> {
    text.trim()
        .parse()
        .map_err(|_| format!("`{}` is not a non-negative integer", text.trim()))
}

pub fn parse_bool(text: &str) -> Result<bool, String> {
    match text.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        other => Err(format!("`{other}` is not a boolean (true/false)")),
    }
}

/// Allowed range of a numeric value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Any,
    /// ≥ 0.
    NonNegative,
    /// > 0.
    Positive,
    /// In [0, 1].
    Fraction,
    /// In (0, 1].
    Transmission,
}

impl Bound {
    fn check(self, v: f64) -> Result<(), &'static str> {
        let ok = match self {
            Bound::Any => true,
            Bound::NonNegative => v >= 0.0,
            Bound::Positive => v > 0.0,
            Bound::Fraction => (0.0..=1.0).contains(&v),
            Bound::Transmission => v > 0.0 && v <= 1.0,
        };
        if ok {
            return Ok(());
        }
        Err(match self {
            Bound::Any => unreachable!(),
            Bound::NonNegative => "must be >= 0",
            Bound::Positive => "must be > 0",
            Bound::Fraction => "must lie in [0, 1]",
            Bound::Transmission => "must lie in (0, 1]",
        })
    }
}

/// Typed access to a [`RawConfig`]. Each lookup records the value text it
/// used, defaults included, so the resolved configuration can be written
/// back out and parsed to the same values.
pub struct Resolver<'a> {
    raw: &'a RawConfig,
    used: Vec<bool>,
    diagnostics: Vec<Diagnostic>,
    resolved: Vec<(String, String, String)>,
}

impl<'a> Resolver<'a> {
    pub fn new(raw: &'a RawConfig) -> Self {
        Self {
            raw,
            used: vec![false; raw.entries.len()],
            diagnostics: Vec::new(),
            resolved: Vec::new(),
        }
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.raw
            .entries
            .iter()
            .find(|e| e.section == section && e.key == key)
            .and_then(|e| e.line)
    }

    /// Whether the file sets `section.key`; does not count as a use.
    pub fn has(&self, section: &str, key: &str) -> bool {
        self.raw.get(section, key).is_some()
    }

    /// Reports a problem that belongs to no single field.
    pub fn report_general(&mut self, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line: None,
            field: None,
            message: message.into(),
        });
    }

    /// Reports a problem with a field that parsed but fails a cross-field
    /// check.
    pub fn report(&mut self, section: &str, key: &str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            line: self.line_of(section, key),
            field: Some(format!("{section}.{key}")),
            message: message.into(),
        });
    }

    /// Looks up `section.key`, falling back to `default`. An invalid value
    /// is reported and replaced by the default so validation can continue.
    fn lookup<T>(
        &mut self,
        section: &str,
        key: &str,
        default: Option<&str>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Option<T> {
        let found = self
            .raw
            .entries
            .iter()
            .position(|e| e.section == section && e.key == key);
        let text = match found {
            Some(i) => {
                self.used[i] = true;
                self.raw.entries[i].value.clone()
            }
            None => match default {
                Some(d) => d.to_owned(),
                None => {
                    self.report(section, key, "required value is missing");
                    return None;
                }
            },
        };
        self.resolved
            .push((section.to_owned(), key.to_owned(), text.clone()));
        match parse(&text) {
            Ok(v) => Some(v),
            Err(message) => {
                self.report(section, key, message);
                default.map(|d| parse(d).expect("built-in default parses"))
            }
        }
    }

    fn bounded(value: f64, bound: Bound) -> Result<f64, String> {
        bound
            .check(value)
            .map(|_| value)
            .map_err(|m| format!("{value} {m}"))
    }

    /// A quantity of dimension `dim` expressed in `unit`.
    pub fn quantity(
        &mut self,
        section: &str,
        key: &str,
        (dim, unit): (Dim, &str),
        default: &str,
        bound: Bound,
    ) -> f64 {
        self.lookup(section, key, Some(default), |t| {
            let v = parse_quantity(t, dim, unit)?;
            bound.check(v).map_err(|m| format!("{} {m}", t.trim()))?;
            Ok(v)
        })
        .expect("defaulted")
    }

    pub fn quantity_list(
        &mut self,
        section: &str,
        key: &str,
        (dim, unit): (Dim, &str),
        default: &str,
        bound: Bound,
    ) -> Vec<f64> {
        self.lookup(section, key, Some(default), |t| {
            t.split(',')
                .map(|item| {
                    let v = parse_quantity(item, dim, unit)?;
                    bound.check(v).map_err(|m| format!("{} {m}", item.trim()))?;
                    Ok(v)
                })
                .collect()
        })
        .expect("defaulted")
    }

    /// Dimensionless value, given plain or as a percentage.
    pub fn fraction(&mut self, section: &str, key: &str, default: &str, bound: Bound) -> f64 {
        self.lookup(section, key, Some(default), |t| {
            Self::bounded(parse_fraction(t)?, bound)
        })
        .expect("defaulted")
    }

    pub fn number(&mut self, section: &str, key: &str, default: &str, bound: Bound) -> f64 {
        self.lookup(section, key, Some(default), |t| {
            Self::bounded(parse_number(t)?, bound)
        })
        .expect("defaulted")
    }

    pub fn number_list(
        &mut self,
        section: &str,
        key: &str,
        default: &str,
        bound: Bound,
    ) -> Vec<f64> {
        self.lookup(section, key, Some(default), |t| {
            t.split(',')
                .map(|item| Self::bounded(parse_number(item)?, bound))
                .collect()
        })
        .expect("defaulted")
    }

    pub fn integer(&mut self, section: &str, key: &str, default: &str, min: u64) -> u64 {
        self.lookup(section, key, Some(default), |t| {
            let v = parse_integer(t)?;
            if v < min {
                return Err(format!("{v} must be >= {min}"));
            }
            Ok(v)
        })
        .expect("defaulted")
    }

    pub fn required_integer(&mut self, section: &str, key: &str) -> Option<u64> {
        self.lookup(section, key, None, parse_integer)
    }

    pub fn flag(&mut self, section: &str, key: &str, default: &str) -> bool {
        self.lookup(section, key, Some(default), parse_bool)
            .expect("defaulted")
    }

    pub fn choice<T: FromStr>(&mut self, section: &str, key: &str, default: &str) -> T
    where
        T::Err: fmt::Display,
    {
        self.lookup(section, key, Some(default), |t| {
            T::from_str(t.trim()).map_err(|e| e.to_string())
        })
        .expect("defaulted")
    }

    /// Free text; absent values stay absent and are not recorded.
    pub fn optional_text(&mut self, section: &str, key: &str) -> Option<String> {
        self.raw
            .entries
            .iter()
            .position(|e| e.section == section && e.key == key)?;
        self.lookup(section, key, None, |t| Ok(t.trim().to_owned()))
    }

    /// A path relative to `base`. The resolved configuration records the
    /// joined path so that it still points at the same file when read from
    /// elsewhere.
    pub fn optional_path(&mut self, section: &str, key: &str, base: &Path) -> Option<PathBuf> {
        let text = self.optional_text(section, key)?;
        let path = base.join(text);
        if let Some(last) = self.resolved.last_mut() {
            last.2 = path.display().to_string();
        }
        Some(path)
    }

    /// Diagnostics so far, without checking for unused entries.
    pub fn abort(self) -> Vec<Diagnostic> {
        self.diagnostics
    }

    /// Flags every entry no lookup asked for and returns the resolved
    /// configuration, or all diagnostics.
    pub fn finish(mut self) -> Result<Resolved, Vec<Diagnostic>> {
        for (entry, used) in self.raw.entries.iter().zip(&self.used) {
            if !used {
                self.diagnostics.push(Diagnostic {
                    line: entry.line,
                    field: Some(format!("{}.{}", entry.section, entry.key)),
                    message: "unknown key for this scenario".into(),
                });
            }
        }
        if self.diagnostics.is_empty() {
            Ok(Resolved {
                values: self.resolved,
            })
        } else {
            self.diagnostics.sort_by_key(|d| d.line.unwrap_or(0));
            Err(self.diagnostics)
        }
    }
}

/// Every value a scenario used, in lookup order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    values: Vec<(String, String, String)>,
}

impl Resolved {
    /// Config-file text holding every resolved value, grouped by section in
    /// order of first use.
    pub fn render(&self) -> String {
        let mut sections: Vec<&str> = Vec::new();
        for (s, _, _) in &self.values {
            if !sections.contains(&s.as_str()) {
                sections.push(s);
            }
        }
        let mut out = String::new();
        for (i, section) in sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("[{section}]\n"));
            for (_, key, value) in self.values.iter().filter(|(s, _, _)| s == section) {
                out.push_str(&format!("{key} = {value}\n"));
            }
        }
        out
    }
}
