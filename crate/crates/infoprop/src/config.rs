//! Run configuration: one TOML file, overridable by CLI flags.
//!
//! Unknown keys are rejected and every numeric field is validated against
//! the domain the downstream modules require, so a config that parses is a
//! config that runs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degree::{load_empirical_pmf, DegreeError, DegreeLaw};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("key '{key}': {expected}")]
    Domain { key: &'static str, expected: String },
    #[error("network kind '{0}' is not one of power_law, poisson, empirical")]
    UnknownKind(String),
    #[error("empirical pmf {path}: {source}")]
    Empirical { path: PathBuf, source: DegreeError },
    #[error(transparent)]
    Degree(#[from] DegreeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_min: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub network: NetworkConfig,
    pub n: usize,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_i0")]
    pub i0: usize,
    #[serde(default = "default_steps")]
    pub steps_per_section: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub parallelism: Option<usize>,
    #[serde(default = "default_milestones")]
    pub milestones: Vec<f64>,
    #[serde(default = "default_outputs")]
    pub outputs: PathBuf,
    #[serde(default = "default_meanfield_dt")]
    pub meanfield_dt: f64,
    #[serde(default)]
    pub degree_weighted_seed: bool,
    #[serde(default)]
    pub trace_k_ext: bool,
    #[serde(default)]
    pub dump_runs: bool,
    #[serde(default)]
    pub export_network: bool,
}

fn default_runs() -> usize {
    100
}
fn default_mu() -> f64 {
    1.0
}
fn default_threshold() -> f64 {
    0.99
}
fn default_i0() -> usize {
    5
}
fn default_steps() -> usize {
    1000
}
fn default_milestones() -> Vec<f64> {
    vec![0.01, 0.5, 1.0]
}
fn default_outputs() -> PathBuf {
    PathBuf::from("out")
}
fn default_meanfield_dt() -> f64 {
    1e-4
}

/// Environment variable supplying the default parallelism.
pub const PARALLELISM_ENV: &str = "INFOPROP_PARALLELISM";

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Effective parallelism: explicit config, else the environment
    /// variable, else 1.
    pub fn effective_parallelism(&self) -> usize {
        self.parallelism
            .or_else(|| {
                std::env::var(PARALLELISM_ENV)
                    .ok()
                    .and_then(|v| v.parse().ok())
            })
            .unwrap_or(1)
            .max(1)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let domain = |key, expected: String| Err(ConfigError::Domain { key, expected });
        if self.n < 3 {
            return domain("n", "an integer of at least 3".into());
        }
        if self.runs == 0 {
            return domain("runs", "at least 1".into());
        }
        if self.mu.is_nan() || self.mu <= 0.0 {
            return domain("mu", format!("a positive rate, got {}", self.mu));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return domain(
                "threshold",
                format!("a fraction in (0, 1], got {}", self.threshold),
            );
        }
        if self.i0 < 1 || self.i0 + 1 >= self.n {
            return domain("i0", format!("1 <= i0 < n-1, got {}", self.i0));
        }
        if self.steps_per_section == 0 {
            return domain("steps_per_section", "at least 1".into());
        }
        if self.milestones.is_empty() {
            return domain("milestones", "at least one fraction".into());
        }
        for &m in &self.milestones {
            if !(m > 0.0 && m <= 1.0) {
                return domain("milestones", format!("fractions in (0, 1], got {m}"));
            }
        }
        if self.meanfield_dt.is_nan() || self.meanfield_dt <= 0.0 {
            return domain(
                "meanfield_dt",
                format!("a positive step, got {}", self.meanfield_dt),
            );
        }
        self.check_network()?;
        Ok(())
    }

    fn check_network(&self) -> Result<(), ConfigError> {
        let net = &self.network;
        match net.kind.as_str() {
            "power_law" => {
                let exponent = net.gamma_prime.ok_or(ConfigError::Domain {
                    key: "network.gamma_prime",
                    expected: "required for power_law networks".into(),
                })?;
                if exponent <= 2.0 {
                    return Err(ConfigError::Domain {
                        key: "network.gamma_prime",
                        expected: format!("an exponent above 2, got {exponent}"),
                    });
                }
                if net.gamma.is_some() {
                    return Err(ConfigError::Domain {
                        key: "network.gamma",
                        expected: "not applicable to power_law networks".into(),
                    });
                }
            }
            "poisson" => {
                let mean = net.gamma.ok_or(ConfigError::Domain {
                    key: "network.gamma",
                    expected: "required for poisson networks".into(),
                })?;
                if mean.is_nan() || mean <= 0.0 {
                    return Err(ConfigError::Domain {
                        key: "network.gamma",
                        expected: format!("a positive mean degree, got {mean}"),
                    });
                }
                if net.gamma_prime.is_some() {
                    return Err(ConfigError::Domain {
                        key: "network.gamma_prime",
                        expected: "not applicable to poisson networks".into(),
                    });
                }
            }
            "empirical" => {
                if net.empirical.is_none() {
                    return Err(ConfigError::Domain {
                        key: "network.empirical",
                        expected: "a pmf file path is required for empirical networks".into(),
                    });
                }
            }
            other => return Err(ConfigError::UnknownKind(other.to_string())),
        }
        if let (Some(lo), Some(hi)) = (net.k_min, net.k_max) {
            if hi < lo {
                return Err(ConfigError::Domain {
                    key: "network.k_max",
                    expected: format!("k_max >= k_min, got {hi} < {lo}"),
                });
            }
        }
        Ok(())
    }

    /// Resolves the configured network into a degree law. Paths in the
    /// config are taken relative to `base` when relative.
    pub fn degree_law(&self, base: &Path) -> Result<DegreeLaw, ConfigError> {
        let net = &self.network;
        match net.kind.as_str() {
            "power_law" => Ok(DegreeLaw::power_law(
                net.gamma_prime.expect("validated"),
                net.k_min.unwrap_or(2),
            )?),
            "poisson" => Ok(DegreeLaw::poisson(
                net.gamma.expect("validated"),
                net.k_min.unwrap_or(1),
            )?),
            "empirical" => {
                let raw = net.empirical.as_ref().expect("validated");
                let path = if raw.is_absolute() {
                    raw.clone()
                } else {
                    base.join(raw)
                };
                let file = fs::File::open(&path).map_err(|e| ConfigError::Empirical {
                    path: path.clone(),
                    source: DegreeError::Io(e),
                })?;
                let pmf = load_empirical_pmf(BufReader::new(file)).map_err(|source| {
                    ConfigError::Empirical {
                        path: path.clone(),
                        source,
                    }
                })?;
                Ok(DegreeLaw::Empirical(pmf))
            }
            _ => unreachable!("validated"),
        }
    }
}

/// Flag-level overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub outputs: Option<PathBuf>,
    pub runs: Option<usize>,
    pub n: Option<usize>,
    pub mu: Option<f64>,
    pub threshold: Option<f64>,
    pub i0: Option<usize>,
    pub steps_per_section: Option<usize>,
    pub kind: Option<String>,
    pub gamma: Option<f64>,
    pub gamma_prime: Option<f64>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub empirical: Option<PathBuf>,
}

impl Overrides {
    /// Applies the overrides on top of a parsed config and revalidates.
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig, ConfigError> {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
        }
        set!(seed);
        set!(outputs);
        set!(runs);
        set!(n);
        set!(mu);
        set!(threshold);
        set!(i0);
        set!(steps_per_section);
        if self.parallelism.is_some() {
            cfg.parallelism = self.parallelism;
        }
        if let Some(kind) = &self.kind {
            cfg.network.kind = kind.clone();
        }
        if self.gamma.is_some() {
            cfg.network.gamma = self.gamma;
        }
        if self.gamma_prime.is_some() {
            cfg.network.gamma_prime = self.gamma_prime;
        }
        if self.k_min.is_some() {
            cfg.network.k_min = self.k_min;
        }
        if self.k_max.is_some() {
            cfg.network.k_max = self.k_max;
        }
        if self.empirical.is_some() {
            cfg.network.empirical = self.empirical.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds a config from flags alone (no file).
    pub fn into_config(self) -> Result<RunConfig, ConfigError> {
        let kind = self.kind.clone().ok_or(ConfigError::Domain {
            key: "network.kind",
            expected: "required when no config file is given (--dist)".into(),
        })?;
        let n = self.n.ok_or(ConfigError::Domain {
            key: "n",
            expected: "required when no config file is given (--n)".into(),
        })?;
        let base = RunConfig {
            network: NetworkConfig {
                kind,
                gamma: None,
                gamma_prime: None,
                k_min: None,
                k_max: None,
                empirical: None,
            },
            n,
            runs: default_runs(),
            mu: default_mu(),
            threshold: default_threshold(),
            i0: default_i0(),
            steps_per_section: default_steps(),
            seed: 0,
            parallelism: None,
            milestones: default_milestones(),
            outputs: default_outputs(),
            meanfield_dt: default_meanfield_dt(),
            degree_weighted_seed: false,
            trace_k_ext: false,
            dump_runs: false,
            export_network: false,
        };
        self.apply(base)
    }
}
