//! Flat `section.key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use liqgeom::book::{SizeRule, DEFAULT_T};
use liqgeom::fit::ModelKind;
use liqgeom::graph::Topology;
use liqgeom::sim::{Orientation, SimConfig};
use thiserror::Error;

/// Only environment input: overrides `io.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "LIQGEOM_OUTPUT_DIR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{path}:{line}: {reason}")]
    Syntax { path: String, line: usize, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sim: SimConfig,
    /// Snapshots (simulation) or seconds (depth data) per averaging window.
    pub window: usize,
    pub models: Vec<ModelKind>,
    pub fit_tol: f64,
    pub fit_max_iter: usize,
    pub grid_scale: f64,
    pub ingest_tick_size: f64,
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    pub asset: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            window: DEFAULT_T,
            models: ModelKind::ALL.to_vec(),
            fit_tol: 1e-10,
            fit_max_iter: 500,
            grid_scale: 2.0,
            ingest_tick_size: 0.01,
            inputs: Vec::new(),
            output_dir: PathBuf::from("out"),
            asset: "SIM".to_string(),
        }
    }
}

/// Every recognised key, in the order the resolved config is written.
pub const KEYS: &[&str] = &[
    "simulation.n_vertices",
    "simulation.topology",
    "simulation.n_steps",
    "simulation.snapshot_every",
    "simulation.tick_size",
    "simulation.size_rule",
    "simulation.seed",
    "simulation.orientation",
    "geometry.K",
    "geometry.T",
    "fit.models",
    "fit.tol",
    "fit.max_iter",
    "fit.grid_scale",
    "ingest.tick_size",
    "io.input",
    "io.output_dir",
    "io.asset",
];

fn parse<T: FromStr>(field: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| invalid(field, format!("cannot parse {value:?}: {e}")))
}

fn positive_f64(field: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = parse(field, value)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(field, format!("must be finite and > 0, got {value}")));
    }
    Ok(v)
}

fn positive_usize(field: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = parse(field, value)?;
    if v == 0 {
        return Err(invalid(field, "must be >= 1"));
    }
    Ok(v)
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "simulation.n_vertices" => {
                let n: usize = parse(key, value)?;
                if n < 3 {
                    return Err(invalid(key, "must be >= 3"));
                }
                self.sim.n_vertices = n;
            }
            "simulation.topology" => self.sim.topology = parse::<Topology>(key, value)?,
            "simulation.n_steps" => self.sim.n_steps = parse(key, value)?,
            "simulation.snapshot_every" => self.sim.snapshot_every = positive_usize(key, value)?,
            "simulation.tick_size" => self.sim.tick_size = positive_f64(key, value)?,
            "simulation.size_rule" => self.sim.size_rule = parse::<SizeRule>(key, value)?,
            "simulation.seed" => self.sim.seed = parse(key, value)?,
            "simulation.orientation" => self.sim.orientation = parse::<Orientation>(key, value)?,
            "geometry.K" => self.sim.k = positive_usize(key, value)?,
            "geometry.T" => self.window = positive_usize(key, value)?,
            "fit.models" => {
                let mut models = Vec::new();
                for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    let m = parse::<ModelKind>(key, name)?;
                    if !models.contains(&m) {
                        models.push(m);
                    }
                }
                if models.is_empty() {
                    return Err(invalid(key, "at least one model is required"));
                }
                self.models = models;
            }
            "fit.tol" => self.fit_tol = positive_f64(key, value)?,
            "fit.max_iter" => self.fit_max_iter = positive_usize(key, value)?,
            "fit.grid_scale" => {
                let s = positive_f64(key, value)?;
                if s < 1.0 {
                    return Err(invalid(key, "must be >= 1"));
                }
                self.grid_scale = s;
            }
            "ingest.tick_size" => self.ingest_tick_size = positive_f64(key, value)?,
            "io.input" => {
                self.inputs = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(PathBuf::from).collect();
            }
            "io.output_dir" => {
                if value.is_empty() {
                    return Err(invalid(key, "must not be empty"));
                }
                self.output_dir = PathBuf::from(value);
            }
            "io.asset" => {
                if value.is_empty() || value.contains([',', '/', '\\']) {
                    return Err(invalid(key, "must be nonempty without ',', '/' or '\\\\'"));
                }
                self.asset = value.to_string();
            }
            other => return Err(invalid(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies a config file: one `key = value` per line, `#` comments.
    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        self.load_str(&text, &path.display().to_string())
    }

    pub fn load_str(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: origin.to_string(),
                    line: idx + 1,
                    reason: format!("expected `key = value`, found {line:?}"),
                });
            };
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    /// Canonical text form; loading it reproduces the same config. The
    /// output directory is left out: the file is written inside it, and
    /// leaving it out keeps runs into different directories byte-identical.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS.iter().filter(|k| **k != "io.output_dir") {
            let _ = writeln!(out, "{key} = {}", self.value(key));
        }
        out
    }

    fn value(&self, key: &str) -> String {
        match key {
            "simulation.n_vertices" => self.sim.n_vertices.to_string(),
            "simulation.topology" => self.sim.topology.as_str().to_string(),
            "simulation.n_steps" => self.sim.n_steps.to_string(),
            "simulation.snapshot_every" => self.sim.snapshot_every.to_string(),
            "simulation.tick_size" => format!("{:e}", self.sim.tick_size),
            "simulation.size_rule" => self.sim.size_rule.as_str().to_string(),
            "simulation.seed" => self.sim.seed.to_string(),
            "simulation.orientation" => self.sim.orientation.as_str().to_string(),
            "geometry.K" => self.sim.k.to_string(),
            "geometry.T" => self.window.to_string(),
            "fit.models" => self.models.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(","),
            "fit.tol" => format!("{:e}", self.fit_tol),
            "fit.max_iter" => self.fit_max_iter.to_string(),
            "fit.grid_scale" => format!("{}", self.grid_scale),
            "ingest.tick_size" => format!("{}", self.ingest_tick_size),
            "io.input" => self.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","),
            "io.output_dir" => self.output_dir.display().to_string(),
            "io.asset" => self.asset.clone(),
            _ => unreachable!("unknown key {key}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.sim.k, 50);
        assert_eq!(c.window, 10);
        assert_eq!(liqgeom::book::DEFAULT_K, 50);
    }

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::default();
        c.load_str("simulation.seed = 7\nfit.models = integrated_gamma, cumulative_lognormal # two\n", "t").unwrap();
        let text = c.render();
        let mut d = RunConfig::default();
        d.load_str(&text, "resolved").unwrap();
        assert_eq!(c, d);
        assert!(!text.contains("io.output_dir"));
        assert_eq!(d.sim.seed, 7);
        assert_eq!(d.models, vec![ModelKind::IntegratedGamma, ModelKind::CumulativeLognormal]);
    }

    #[test]
    fn errors_name_the_field() {
        let mut c = RunConfig::default();
        let e = c.set("fit.models", "gamma,integrated_gamma").unwrap_err();
        assert!(e.to_string().starts_with("fit.models:"), "{e}");
        let e = c.set("simulation.tick_size", "-1").unwrap_err();
        assert!(e.to_string().starts_with("simulation.tick_size:"));
        let e = c.set("simulation.colour", "red").unwrap_err();
        assert!(e.to_string().starts_with("simulation.colour: unknown key"));
        assert!(matches!(c.load_str("no equals sign", "f"), Err(ConfigError::Syntax { line: 1, .. })));
    }
}
