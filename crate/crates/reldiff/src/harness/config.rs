//! Experiment configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! schema_version = 1
//! experiment = "roup_juttner"
//! seed = 42
//! scale = "full"          # or "smoke"
//! paths = 100000          # optional, experiment default otherwise
//! dt = 0.01               # optional
//! n_steps = 2000          # optional
//! workers = 4             # optional, all cores otherwise
//! out = "out/roup"        # optional
//!
//! [process]               # optional; must match the experiment's family
//! preset = "roup_mink"
//! alpha = 0.5
//!
//! [estimator]             # all optional
//! bins = 20
//! k = 5
//! batches = 10
//! bootstrap = 200
//! bandwidth = 0.1
//! ```

use crate::processes::Preset;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("unknown experiment `{0}` (see `reldiff list`)")]
    UnknownExperiment(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn field(name: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { field: name.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Full,
    Smoke,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOverrides {
    pub bins: Option<usize>,
    pub k: Option<usize>,
    pub batches: Option<usize>,
    pub bootstrap: Option<usize>,
    pub bandwidth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub scale: Scale,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub n_steps: Option<usize>,
    /// Not part of the report: results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub process: Option<Preset>,
    #[serde(default)]
    pub estimator: EstimatorOverrides,
}

fn default_seed() -> u64 {
    42
}

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.into(),
            seed: default_seed(),
            scale: Scale::Full,
            paths: None,
            dt: None,
            n_steps: None,
            workers: None,
            out: None,
            process: None,
            estimator: EstimatorOverrides::default(),
        }
    }

    pub fn smoke(experiment: &str) -> Self {
        Self { scale: Scale::Smoke, ..Self::new(experiment) }
    }

    /// Parses and validates a TOML document. Errors carry line and column.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        let info = super::registry::find(&self.experiment)
            .ok_or_else(|| ConfigError::UnknownExperiment(self.experiment.clone()))?;
        if self.paths == Some(0) {
            return Err(field("paths", "must be positive"));
        }
        if self.n_steps == Some(0) {
            return Err(field("n_steps", "must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(field("dt", format!("must be positive and finite, got {dt}")));
            }
        }
        if self.workers == Some(0) {
            return Err(field("workers", "must be positive"));
        }
        let e = &self.estimator;
        for (name, v) in [("estimator.bins", e.bins), ("estimator.k", e.k), ("estimator.bootstrap", e.bootstrap)] {
            if v == Some(0) {
                return Err(field(name, "must be positive"));
            }
        }
        if matches!(e.batches, Some(b) if b < 2) {
            return Err(field("estimator.batches", "need at least 2 batches"));
        }
        if let Some(h) = e.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(field("estimator.bandwidth", format!("must be positive, got {h}")));
            }
        }
        if let Some(p) = &self.process {
            (info.accepts)(p).map_err(|m| field("process", m))?;
            validate_preset(p)?;
        }
        Ok(())
    }

    pub fn is_smoke(&self) -> bool {
        self.scale == Scale::Smoke
    }
}

fn validate_preset(p: &Preset) -> Result<(), ConfigError> {
    let alpha = match p {
        Preset::RoupMink { alpha } | Preset::RoupRw { alpha, .. } => Some(*alpha),
        _ => None,
    };
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(field("process.alpha", format!("must be positive, got {a}")));
        }
    }
    crate::processes::make_process(
        *p,
        crate::framebundle::NoiseSpec::isotropic(0),
        crate::framebundle::IntegratorParams::default(),
    )
    .map(|_| ())
    .map_err(|e| field("process", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_document() {
        let cfg = ExperimentConfig::from_toml(
            r#"
schema_version = 1
experiment = "roup_juttner"
seed = 7
scale = "smoke"
paths = 2000
dt = 0.02

[process]
preset = "roup_mink"
alpha = 0.75

[estimator]
bins = 10
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(cfg.is_smoke());
        assert_eq!(cfg.process, Some(Preset::RoupMink { alpha: 0.75 }));
        assert_eq!(cfg.estimator.bins, Some(10));
    }

    #[test]
    fn errors_name_the_field_or_line() {
        let e = ExperimentConfig::from_toml("schema_version = 1\nexperiment = \"dudley_radial_moment\"\ndt = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("`dt`"), "{e}");
        let e = ExperimentConfig::from_toml("schema_version = 1\nexperiment = \"nope\"\n").unwrap_err();
        assert!(matches!(e, ConfigError::UnknownExperiment(_)));
        let e = ExperimentConfig::from_toml("schema_version = 1\nexperiment = \"roup_juttner\"\npths = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = ExperimentConfig::from_toml("schema_version = 2\nexperiment = \"roup_juttner\"\n").unwrap_err();
        assert!(e.to_string().contains("schema_version"), "{e}");
    }

    #[test]
    fn preset_must_match_the_experiment() {
        let e = ExperimentConfig::from_toml(
            "schema_version = 1\nexperiment = \"roup_juttner\"\n[process]\npreset = \"dudley\"\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("process"), "{e}");
        let e = ExperimentConfig::from_toml(
            "schema_version = 1\nexperiment = \"roup_juttner\"\n[process]\npreset = \"roup_mink\"\nalpha = -1.0\n",
        )
        .unwrap_err();
        assert!(e.to_string().contains("alpha"), "{e}");
    }
}
