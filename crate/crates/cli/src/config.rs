//! Toolkit configuration: a JSON file with every key optional, plus
//! environment overrides for the backend URLs.

use std::path::{Path, PathBuf};
use std::time::Duration;

use mathkg_core::completion::CompletionConfig;
use mathkg_core::embedding::{EmbedConfig, Embedder, HashEmbedder, RemoteEmbedder};
use mathkg_core::eval::{ReachEvalConfig, TranseConfig};
use mathkg_core::fusion::FusionConfig;
use mathkg_core::llm::{AugmentConfig, CompletionParams, LlmBackend, RemoteLlmBackend, ScriptedMockBackend};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_LLM_URL: &str = "AMKG_LLM_URL";
pub const ENV_EMBED_URL: &str = "AMKG_EMBED_URL";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub kg: Option<PathBuf>,
    pub vd: Option<PathBuf>,
    /// Scripted mock fixtures (JSON Lines) used when no LLM URL is set.
    pub llm_fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub url: Option<String>,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub params: CompletionParams,
    /// Reply of the scripted mock when no fixture matches.
    pub mock_default: String,
}

impl Default for LlmSettings {
    fn default() -> Self {
        LlmSettings {
            url: None,
            timeout_secs: 120,
            attempts: mathkg_core::llm::DEFAULT_RETRIES,
            params: CompletionParams::default(),
            mock_default: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderSettings {
    /// Unset selects the builtin hash embedder.
    pub url: Option<String>,
    pub timeout_secs: u64,
    pub batch_size: usize,
}

impl Default for EmbedderSettings {
    fn default() -> Self {
        EmbedderSettings {
            url: None,
            timeout_secs: 60,
            batch_size: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub paths: Paths,
    pub llm: LlmSettings,
    pub embedder: EmbedderSettings,
    pub embed: EmbedConfig,
    pub fusion_candidates: usize,
    pub completion_max_rounds: usize,
    pub completion_fuzzy_k: usize,
    pub parallelism: usize,
    pub simple_cycle_cap: usize,
    pub reach: ReachEvalConfig,
    pub transe: TranseConfig,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        ToolkitConfig {
            paths: Paths::default(),
            llm: LlmSettings::default(),
            embedder: EmbedderSettings::default(),
            embed: EmbedConfig::default(),
            fusion_candidates: 5,
            completion_max_rounds: 3,
            completion_fuzzy_k: 3,
            parallelism: 4,
            simple_cycle_cap: 100_000,
            reach: ReachEvalConfig::default(),
            transe: TranseConfig::default(),
        }
    }
}

impl ToolkitConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let cfg: ToolkitConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `AMKG_LLM_URL` / `AMKG_EMBED_URL` when set and nonempty.
    pub fn apply_env(&mut self) {
        self.apply_overrides(std::env::var(ENV_LLM_URL).ok(), std::env::var(ENV_EMBED_URL).ok());
    }

    pub fn apply_overrides(&mut self, llm_url: Option<String>, embed_url: Option<String>) {
        if let Some(u) = llm_url.filter(|u| !u.trim().is_empty()) {
            self.llm.url = Some(u);
        }
        if let Some(u) = embed_url.filter(|u| !u.trim().is_empty()) {
            self.embedder.url = Some(u);
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let limits = [
            ("llm.timeout_secs", self.llm.timeout_secs as usize),
            ("llm.attempts", self.llm.attempts as usize),
            ("embedder.timeout_secs", self.embedder.timeout_secs as usize),
            ("embedder.batch_size", self.embedder.batch_size),
            ("fusion_candidates", self.fusion_candidates),
            ("completion_max_rounds", self.completion_max_rounds),
            ("completion_fuzzy_k", self.completion_fuzzy_k),
            ("parallelism", self.parallelism),
            ("simple_cycle_cap", self.simple_cycle_cap),
            ("reach.k", self.reach.k),
            ("transe.dim", self.transe.dim),
            ("transe.negatives_per_positive", self.transe.negatives_per_positive),
        ];
        if let Some((name, _)) = limits.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Data(format!("config: {name} must be positive")));
        }
        if self.reach.q_values.is_empty() || self.reach.q_values.contains(&0) {
            return Err(CliError::Data("config: reach.q_values must be nonempty and positive".into()));
        }
        if !(self.transe.margin > 0.0) || !(self.transe.learning_rate > 0.0) {
            return Err(CliError::Data("config: transe margin and learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn embedder(&self) -> Result<Box<dyn Embedder>, CliError> {
        match &self.embedder.url {
            Some(url) => Ok(Box::new(
                RemoteEmbedder::new(url, Duration::from_secs(self.embedder.timeout_secs), self.embedder.batch_size)
                    .map_err(|e| CliError::Backend(e.to_string()))?,
            )),
            None => Ok(Box::new(HashEmbedder)),
        }
    }

    /// The remote backend when a URL is configured, else the scripted mock.
    pub fn llm(&self) -> Result<Box<dyn LlmBackend>, CliError> {
        if let Some(url) = &self.llm.url {
            return Ok(Box::new(
                RemoteLlmBackend::new(url, Duration::from_secs(self.llm.timeout_secs))
                    .map_err(|e| CliError::Backend(e.to_string()))?,
            ));
        }
        let Some(path) = &self.paths.llm_fixtures else {
            return Err(CliError::Backend(format!(
                "no LLM backend: set llm.url, {ENV_LLM_URL} or --llm-fixtures"
            )));
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mock = ScriptedMockBackend::from_jsonl(&text, &self.llm.mock_default)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(Box::new(mock))
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            params: self.llm.params,
            attempts: self.llm.attempts,
            parallelism: self.parallelism,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            n_candidates: self.fusion_candidates,
            embed: self.embed,
            params: self.llm.params,
            attempts: self.llm.attempts,
        }
    }

    pub fn completion_config(&self) -> CompletionConfig {
        CompletionConfig {
            max_rounds: self.completion_max_rounds,
            fuzzy_k: self.completion_fuzzy_k,
            embed: self.embed,
            params: self.llm.params,
            attempts: self.llm.attempts,
        }
    }
}
