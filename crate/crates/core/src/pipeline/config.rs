use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentBackend, AgentError, ScriptedBackend, ServiceBackend, ServiceConfig};
use crate::evaluate::{EvaluatorSet, Weights};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Scripted {
        #[serde(default)]
        fixtures: Option<PathBuf>,
    },
    Service(ServiceConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Scripted { fixtures: None }
    }
}

fn default_iterations() -> usize {
    3
}

/// Run configuration, usually read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default = "default_iterations")]
    pub max_adapt_iterations: usize,
    #[serde(default)]
    pub weights: Weights,
    /// Draft sections one after another, each against the latest contract.
    #[serde(default)]
    pub strict_sequential: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub disabled_evaluators: Vec<String>,
    #[serde(default)]
    pub fixed_clock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::default(),
            max_adapt_iterations: default_iterations(),
            weights: Weights::default(),
            strict_sequential: false,
            output_dir: None,
            disabled_evaluators: Vec::new(),
            fixed_clock: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid run config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid run config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.check()?;
        Ok(config)
    }

    /// Load from a file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let BackendConfig::Scripted { fixtures: Some(dir) } = &mut config.backend {
            *dir = base.join(&*dir);
        }
        if let Some(dir) = &mut config.output_dir {
            *dir = base.join(&*dir);
        }
        Ok(config)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.max_adapt_iterations == 0 {
            return Err(ConfigError::Invalid("max_adapt_iterations must be at least 1".into()));
        }
        let known = EvaluatorSet::default();
        let ids = known.ids();
        if let Some(bad) = self.disabled_evaluators.iter().find(|d| !ids.contains(&d.as_str())) {
            return Err(ConfigError::Invalid(format!(
                "unknown evaluator `{bad}` (known: {})",
                ids.join(", ")
            )));
        }
        Ok(())
    }

    pub fn evaluators(&self) -> EvaluatorSet {
        EvaluatorSet::default().without(&self.disabled_evaluators)
    }

    pub fn build_backend(&self) -> Result<Box<dyn AgentBackend>, AgentError> {
        match &self.backend {
            BackendConfig::Scripted { fixtures: Some(dir) } => Ok(Box::new(ScriptedBackend::new(dir))),
            BackendConfig::Scripted { fixtures: None } => Err(AgentError::Config(
                "scripted backend needs a fixture directory (`--fixtures` or `backend.fixtures`)".into(),
            )),
            BackendConfig::Service(cfg) => Ok(Box::new(ServiceBackend::new(cfg.clone())?)),
        }
    }
}
