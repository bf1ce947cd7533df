//! Run-configuration loading and validation for the `vessel` binary.
//!
//! A configuration is one JSON object; every subcommand shares the schema
//! and reads only the fields it needs. Validation failures name the
//! offending key so they can be fixed without consulting the source.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use vessel_core::SpectralMeasure;

/// A configuration problem: the file could not be read or parsed, or a
/// field failed validation. Always mapped to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Where the measure comes from: a JSON file (resolved relative to the
/// config file) or an inline `{"atoms": [...]}` object.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MeasureSource {
    Path(String),
    Inline(serde_json::Value),
}

/// The on-disk configuration schema. All fields are optional; each
/// subcommand enforces presence of the ones it requires.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Measure to operate on. `verify` falls back to a seeded sample when
    /// this is absent.
    pub measure: Option<MeasureSource>,
    /// Spatial grid `[min, max, steps]`.
    pub x_range: Option<[f64; 3]>,
    /// Temporal grid `[min, max, steps]`.
    pub t_range: Option<[f64; 3]>,
    /// Finite-difference step; must lie in (0, 0.1].
    pub fd_step: Option<f64>,
    /// Quadrature node count for the integral-equation pipeline.
    pub quad_points: Option<usize>,
    /// Pass/fail threshold applied by the invoked subcommand.
    pub tol: Option<f64>,
    /// Optional declared subcommand; it must match the one invoked.
    pub command: Option<String>,
    /// Seed for the fallback sample measure (`verify` only).
    pub seed: Option<u64>,
}

/// A validated `[min, max, steps]` range.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    /// Evenly spaced points, both endpoints included.
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|i| self.min + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

/// Validate a `[min, max, steps]` triple stored under `name`.
///
/// `steps` must be an integer and at least 2; a single-point grid
/// (`steps = 1`) is accepted only when `min == max`, so a degenerate range
/// can express "one fixed slice".
pub fn parse_range(name: &str, raw: &[f64; 3]) -> Result<Grid, ConfigError> {
    let [min, max, steps_f] = *raw;
    if !min.is_finite() || !max.is_finite() || !steps_f.is_finite() {
        return Err(ConfigError(format!("{name}: entries must be finite")));
    }
    if steps_f.fract() != 0.0 || steps_f < 1.0 || steps_f > 1e7 {
        return Err(ConfigError(format!(
            "{name}: steps must be an integer in [1, 1e7] (got {steps_f})"
        )));
    }
    let steps = steps_f as usize;
    if min > max {
        return Err(ConfigError(format!("{name}: min {min} exceeds max {max}")));
    }
    if steps == 1 && min != max {
        return Err(ConfigError(format!(
            "{name}: steps must be at least 2 unless min == max (got steps = 1 on [{min}, {max}])"
        )));
    }
    Ok(Grid { min, max, steps })
}

/// Fetch and validate a required range field.
pub fn require_range(name: &str, raw: &Option<[f64; 3]>) -> Result<Grid, ConfigError> {
    match raw {
        Some(triple) => parse_range(name, triple),
        None => Err(ConfigError(format!(
            "{name}: missing required [min, max, steps]"
        ))),
    }
}

/// Load a config file, returning the parsed config and its parent directory
/// (used to resolve relative measure paths).
pub fn load(path: &Path) -> anyhow::Result<(RunConfig, PathBuf)> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((cfg, base))
}

/// Check the config's optional `command` tag against the invoked subcommand.
pub fn check_command_tag(cfg: &RunConfig, invoked: &str) -> Result<(), ConfigError> {
    if let Some(tag) = &cfg.command {
        if tag != invoked {
            return Err(ConfigError(format!(
                "command: config declares {tag:?} but {invoked:?} was invoked"
            )));
        }
    }
    Ok(())
}

/// Resolve the measure source into a validated measure.
pub fn resolve_measure(source: &MeasureSource, base: &Path) -> anyhow::Result<SpectralMeasure> {
    match source {
        MeasureSource::Path(rel) => {
            let p = Path::new(rel);
            let full = if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            };
            let text = fs::read_to_string(&full)
                .map_err(|e| ConfigError(format!("measure: {}: {e}", full.display())))?;
            Ok(SpectralMeasure::from_json(&text)?)
        }
        MeasureSource::Inline(value) => Ok(SpectralMeasure::from_json(&value.to_string())?),
    }
}

/// Validate a finite-difference step.
pub fn validate_fd_step(h: f64) -> Result<f64, ConfigError> {
    if !(h > 0.0 && h <= 0.1) {
        return Err(ConfigError(format!(
            "fd_step: must lie in (0, 0.1] (got {h})"
        )));
    }
    Ok(h)
}

/// Validate the quadrature node count.
pub fn validate_quad_points(n: usize) -> Result<usize, ConfigError> {
    if !(2..=4096).contains(&n) {
        return Err(ConfigError(format!(
            "quad_points: must lie in [2, 4096] (got {n})"
        )));
    }
    Ok(n)
}

/// Validate a pass/fail threshold.
pub fn validate_tol(tol: f64) -> Result<f64, ConfigError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(ConfigError(format!(
            "tol: must be positive and finite (got {tol})"
        )));
    }
    Ok(tol)
}
