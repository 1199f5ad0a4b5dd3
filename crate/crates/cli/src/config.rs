//! Experiment configuration: one JSON document, optionally overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tauleap_core::exact::TruncationSpec;
use tauleap_core::metrics::NormSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON for an experiment: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_samples() -> usize {
    1000
}

fn default_r_list() -> Vec<u32> {
    vec![0]
}

fn default_rate_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Reaction network in the text format; relative paths resolve against
    /// the directory of the config file.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
    /// `ssa`, `explicit`, `midpoint` or `remm`. `ssa` is only valid for
    /// `simulate`; other commands default to `explicit`.
    #[serde(default)]
    pub kernel: Option<String>,
    /// Multiplies every rate of the explicit kernel. Negative control only.
    #[serde(default = "default_rate_scale")]
    pub kernel_rate_scale: f64,
    #[serde(default)]
    pub x0: Vec<i64>,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default)]
    pub tau_list: Vec<f64>,
    #[serde(default = "default_r_list")]
    pub r_list: Vec<u32>,
    /// Unset means the 1-norm, except that `verify` then uses the alpha norm.
    #[serde(default)]
    pub norm: Option<NormSpec>,
    #[serde(default)]
    pub truncation: Option<TruncationSpec>,
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// Command-line values that replace config fields when present.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub model_path: Option<PathBuf>,
    pub kernel: Option<String>,
    pub x0: Option<Vec<i64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tau_list: Option<Vec<f64>>,
    pub r_list: Option<Vec<u32>>,
    pub t_final: Option<f64>,
    pub samples: Option<usize>,
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Splits `0.25,0.125` style lists.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(|f| f.parse().map_err(|_| ConfigError::Invalid(format!("`{f}` in list `{s}` does not parse"))))
        .collect()
}

impl ExperimentConfig {
    /// Reads a config file and makes `model_path` absolute-or-cwd-relative.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg: Self = serde_json::from_str(&text)?;
        if let (Some(model), Some(dir)) = (&cfg.model_path, path.parent()) {
            if model.is_relative() {
                cfg.model_path = Some(dir.join(model));
            }
        }
        Ok(cfg)
    }

    /// Config built from flags alone; `T` and `seed` must then be given.
    pub fn from_overrides(o: &Overrides) -> Result<Self, ConfigError> {
        let (Some(t_final), Some(seed)) = (o.t_final, o.seed) else {
            return invalid("without --config, both --T and --seed are required");
        };
        let mut cfg = Self {
            model_path: None,
            kernel: None,
            kernel_rate_scale: 1.0,
            x0: Vec::new(),
            t_final,
            tau_list: Vec::new(),
            r_list: default_r_list(),
            norm: None,
            truncation: None,
            seed,
            out: default_out(),
            samples: default_samples(),
        };
        cfg.apply(o);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.model_path {
            self.model_path = Some(v.clone());
        }
        if let Some(v) = &o.kernel {
            self.kernel = Some(v.clone());
        }
        if let Some(v) = &o.x0 {
            self.x0 = v.clone();
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.tau_list {
            self.tau_list = v.clone();
        }
        if let Some(v) = &o.r_list {
            self.r_list = v.clone();
        }
        if let Some(v) = o.t_final {
            self.t_final = v;
        }
        if let Some(v) = o.samples {
            self.samples = v;
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.t_final.is_finite() || self.t_final < 0.0 {
            return invalid(format!("T must be finite and non-negative, got {}", self.t_final));
        }
        if self.tau_list.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return invalid(format!("tau_list entries must be positive, got {:?}", self.tau_list));
        }
        if self.tau_list.windows(2).any(|w| w[1] >= w[0]) {
            return invalid(format!("tau_list must be strictly decreasing, got {:?}", self.tau_list));
        }
        if !self.kernel_rate_scale.is_finite() || self.kernel_rate_scale <= 0.0 {
            return invalid(format!("kernel_rate_scale must be positive, got {}", self.kernel_rate_scale));
        }
        if self.kernel_rate_scale != 1.0 && self.kernel.as_deref() != Some("explicit") {
            return invalid("kernel_rate_scale applies to the explicit kernel only");
        }
        if let Some(k) = &self.kernel {
            if !matches!(k.as_str(), "ssa" | "explicit" | "midpoint" | "remm") {
                return invalid(format!("unknown kernel `{k}`; expected ssa, explicit, midpoint or remm"));
            }
        }
        if let Some(n) = &self.norm {
            n.validate(None).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        if let Some(t) = &self.truncation {
            t.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the effective config as canonical JSON, without
    /// `model_path` and `out`. The model enters outputs through its own
    /// content hash, so moving files around does not change this value.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("model_path");
            map.remove("out");
        }
        let canonical = serde_json::to_string(&v).expect("value serializes");
        hex(&Sha256::digest(canonical.as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
