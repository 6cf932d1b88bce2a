//! Declarative run configuration (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::HierarchyConfig;
use crate::garibaldi::GaribaldiConfig;
use crate::replacement::PolicySpec;
use crate::sim::SimConfig;
use crate::trace::{generate_few_to_many, generate_many_to_few, read_trace, MemoryAccess, TraceError, TraceGenConfig};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    ManyToFew,
    FewToMany,
}

impl Pattern {
    pub fn default_config(self) -> TraceGenConfig {
        match self {
            Pattern::ManyToFew => TraceGenConfig::many_to_few_default(),
            Pattern::FewToMany => TraceGenConfig::few_to_many_default(),
        }
    }

    pub fn generate(self, cfg: &TraceGenConfig) -> Result<Vec<MemoryAccess>, TraceError> {
        match self {
            Pattern::ManyToFew => generate_many_to_few(cfg),
            Pattern::FewToMany => generate_few_to_many(cfg),
        }
    }
}

/// Synthetic trace source. `config` holds only the fields that differ from
/// the pattern's defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorBlock {
    pub pattern: Pattern,
    #[serde(default)]
    pub config: serde_json::Map<String, serde_json::Value>,
}

impl GeneratorBlock {
    pub fn resolve(&self, seed_override: Option<u64>) -> Result<TraceGenConfig, ConfigError> {
        let mut merged = match serde_json::to_value(self.pattern.default_config())? {
            serde_json::Value::Object(m) => m,
            _ => unreachable!("generator config is a struct"),
        };
        for (k, v) in &self.config {
            merged.insert(k.clone(), v.clone());
        }
        let mut cfg: TraceGenConfig = serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| ConfigError::Invalid(format!("generator.config: {e}")))?;
        if let Some(seed) = seed_override {
            cfg.rng_seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsFlags {
    pub events: bool,
    pub pair_table: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub generator: Option<GeneratorBlock>,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    #[serde(default)]
    pub policy: PolicySpec,
    /// Absent means the bare policy.
    #[serde(default)]
    pub garibaldi: Option<GaribaldiConfig>,
    #[serde(default)]
    pub metrics: MetricsFlags,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub output: OutputPaths,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            trace: None,
            generator: None,
            hierarchy: HierarchyConfig::default(),
            policy: PolicySpec::Lru,
            garibaldi: None,
            metrics: MetricsFlags::default(),
            rng_seed: None,
            output: OutputPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.sim_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(g) = &self.generator {
            g.resolve(self.rng_seed)?;
        }
        Ok(())
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig::new(self.hierarchy.clone(), self.policy.clone(), self.garibaldi.clone())
    }

    /// The trace named by the config: a file if `trace` is set, otherwise
    /// the generator block.
    pub fn load_trace(&self) -> Result<Vec<MemoryAccess>, TraceError> {
        if let Some(path) = &self.trace {
            return read_trace(path);
        }
        match &self.generator {
            Some(g) => {
                let cfg = g.resolve(self.rng_seed).map_err(|e| TraceError::Config(e.to_string()))?;
                g.pattern.generate(&cfg)
            }
            None => Err(TraceError::Config("config names neither a trace file nor a generator".into())),
        }
    }
}
