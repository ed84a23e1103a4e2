//! TOML experiment files.
//!
//! ```toml
//! schema_version = 1
//! kind = "learning_curve"      # or "sum_rate_sweep", "convexity_probe"
//! trials = 200                 # everything below is optional
//! precoders = ["mf", "zf", "mmse"]
//!
//! [system]
//! n_tx = 4
//! users = [2, 2]
//! es_grid_step = 0.05
//!
//! [output]
//! path = "fig2.csv"
//! format = "csv"
//! ```
//!
//! Omitted fields take the defaults of the chosen kind (see
//! [`ExperimentSpec::defaults`]). Unknown keys are rejected with the line
//! they appear on and the closest valid key.

use std::path::Path;

use serde::de::DeserializeOwned;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::{ExperimentKind, ExperimentSpec, OutputFormat};

/// The only schema version this build understands.
pub const SCHEMA_VERSION: i64 = 1;

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "kind",
    "trials",
    "precoders",
    "allocators",
    "snr_grid_db",
    "probe_steps",
    "system",
    "output",
];
const SYSTEM_KEYS: &[&str] = &[
    "n_tx",
    "users",
    "sigma_n2",
    "sigma_e2",
    "e_tr",
    "seed",
    "step_size",
    "iterations",
    "es_grid_step",
    "robust_prefactor",
];
const OUTPUT_KEYS: &[&str] = &["path", "format"];

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub format: Option<OutputFormat>,
    pub out: Option<String>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ExperimentSpec) {
        if let Some(seed) = self.seed {
            spec.system.seed = seed;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(format) = self.format {
            spec.format = format;
        }
        if let Some(out) = &self.out {
            spec.output_path = Some(out.clone());
        }
    }
}

/// Reads, parses and validates an experiment file.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentSpec> {
    load_config(path, &Overrides::default())
}

/// Like [`parse_config`], with `overrides` applied before validation.
pub fn load_config(path: impl AsRef<Path>, overrides: &Overrides) -> Result<ExperimentSpec> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut spec = parse_config_str(&source).map_err(|e| match e {
        Error::Config { message, .. } => Error::Config {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })?;
    overrides.apply(&mut spec);
    spec.validate()?;
    Ok(spec)
}

/// Parses config text into a spec. Does not run [`ExperimentSpec::validate`].
pub fn parse_config_str(source: &str) -> Result<ExperimentSpec> {
    let fail = |message: String| Error::Config {
        path: "<string>".into(),
        message,
    };
    let mut doc: Table = toml::from_str(source).map_err(|e| fail(e.to_string().trim_end().to_string()))?;

    check_keys(source, None, &doc, TOP_KEYS).map_err(fail)?;
    for (section, keys) in [("system", SYSTEM_KEYS), ("output", OUTPUT_KEYS)] {
        match doc.get(section) {
            None => {}
            Some(Value::Table(t)) => check_keys(source, Some(section), t, keys).map_err(fail)?,
            Some(_) => return Err(fail(format!("`{section}` must be a table ([{section}])"))),
        }
    }

    match doc.remove("schema_version") {
        None => return Err(fail(format!("missing `schema_version` (this build reads version {SCHEMA_VERSION})"))),
        Some(Value::Integer(SCHEMA_VERSION)) => {}
        Some(other) => {
            return Err(fail(format!(
                "unsupported schema_version {other} at line {}; this build reads version {SCHEMA_VERSION}",
                line_of(source, None, "schema_version").unwrap_or(0)
            )))
        }
    }
    let kind = match doc.remove("kind") {
        None => return Err(fail("missing `kind`".into())),
        Some(Value::String(s)) => parse_kind(&s).ok_or_else(|| {
            fail(format!(
                "unknown kind \"{s}\" at line {}; expected learning_curve, sum_rate_sweep or convexity_probe",
                line_of(source, None, "kind").unwrap_or(0)
            ))
        })?,
        Some(other) => return Err(fail(format!("`kind` must be a string, got {other}"))),
    };

    let mut spec = ExperimentSpec::defaults(kind);
    if let Some(Value::Table(user_system)) = doc.remove("system") {
        // Overlay the given keys on the kind's defaults so unspecified
        // fields keep kind-specific values.
        let mut merged = match Value::try_from(&spec.system) {
            Ok(Value::Table(t)) => t,
            _ => unreachable!("system config serializes to a table"),
        };
        merged.extend(user_system);
        spec.system = field(source, Some("system"), "system", Value::Table(merged)).map_err(fail)?;
    }
    if let Some(Value::Table(mut output)) = doc.remove("output") {
        if let Some(v) = output.remove("path") {
            spec.output_path = Some(field(source, Some("output"), "path", v).map_err(fail)?);
        }
        if let Some(v) = output.remove("format") {
            spec.format = field(source, Some("output"), "format", v).map_err(fail)?;
        }
    }
    for (key, value) in doc {
        match key.as_str() {
            "trials" => spec.trials = field(source, None, &key, value).map_err(fail)?,
            "precoders" => spec.precoders = field(source, None, &key, value).map_err(fail)?,
            "allocators" => spec.allocators = field(source, None, &key, value).map_err(fail)?,
            "snr_grid_db" => spec.snr_grid_db = field(source, None, &key, value).map_err(fail)?,
            "probe_steps" => spec.probe_steps = field(source, None, &key, value).map_err(fail)?,
            _ => unreachable!("keys were checked"),
        }
    }
    Ok(spec)
}

fn parse_kind(s: &str) -> Option<ExperimentKind> {
    match s.to_ascii_lowercase().as_str() {
        "learning_curve" => Some(ExperimentKind::LearningCurve),
        "sum_rate_sweep" | "sumrate_sweep" => Some(ExperimentKind::SumRateSweep),
        "convexity_probe" => Some(ExperimentKind::ConvexityProbe),
        _ => None,
    }
}

fn field<T: DeserializeOwned>(source: &str, section: Option<&str>, key: &str, value: Value) -> std::result::Result<T, String> {
    value.try_into().map_err(|e: toml::de::Error| {
        let qualified = section.map_or(key.to_string(), |s| if s == key { s.to_string() } else { format!("{s}.{key}") });
        let at = line_of(source, section.filter(|s| *s != key), key)
            .map(|l| format!(" at line {l}"))
            .unwrap_or_default();
        format!("invalid `{qualified}`{at}: {}", e.to_string().trim_end())
    })
}

fn check_keys(source: &str, section: Option<&str>, table: &Table, allowed: &[&str]) -> std::result::Result<(), String> {
    for key in table.keys() {
        if allowed.contains(&key.as_str()) {
            continue;
        }
        let qualified = section.map_or(key.clone(), |s| format!("{s}.{key}"));
        let at = line_of(source, section, key)
            .map(|l| format!(" at line {l}"))
            .unwrap_or_default();
        let hint = nearest(key, allowed)
            .map(|k| format!("; did you mean `{k}`?"))
            .unwrap_or_default();
        return Err(format!("unknown key `{qualified}`{at}{hint}"));
    }
    Ok(())
}

/// Closest allowed key by Jaro-Winkler similarity, if reasonably close.
fn nearest<'a>(key: &str, allowed: &[&'a str]) -> Option<&'a str> {
    allowed
        .iter()
        .map(|k| (strsim::jaro_winkler(key, k), *k))
        .filter(|(score, _)| *score > 0.6)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, k)| k)
}

/// 1-based line where `key` is assigned inside `section` (top level when
/// `None`). A best-effort scan that covers the usual `key = value` layout.
fn line_of(source: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.split(']').next()) {
            current = Some(header.trim().to_string());
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim().trim_matches('"');
        let hit = match (section, current.as_deref()) {
            (None, None) => lhs == key,
            (Some(s), Some(c)) if s == c => lhs == key,
            (Some(s), None) => lhs == format!("{s}.{key}"),
            _ => false,
        };
        if hit {
            return Some(i + 1);
        }
    }
    None
}
