//! Gateway configuration: agents, prompt templates and service defaults,
//! loaded from a TOML document.
//!
//! ```toml
//! deadline_ms = 30000
//! synonyms = "synonyms.tsv"
//!
//! [label_pools]
//! cardio = ["myocardial infarction", "aortic dissection", "pericarditis"]
//!
//! [[agents]]
//! agent_id = "gpt"
//! kind = "http_llm"
//! endpoint = "https://api.openai.com/v1/chat/completions"
//! token_env = "OPENAI_API_KEY"
//! model = "gpt-4o"
//!
//! [[agents]]
//! agent_id = "stub-a"
//! kind = "stub"
//! seed = 7
//! target_accuracy = 0.6
//! label_pool = "cardio"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.
//! Credentials are only ever referenced by environment variable name.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use medas_core::eval::ReplayLog;
use medas_core::prompt::{PromptTemplate, DEFAULT_MAX_HYPOTHESES, DEFAULT_TEMPLATE_ID};
use medas_core::stub::StubProfile;
use medas_core::{AgentId, AgentStatus, Strategy, SynonymTable};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DEADLINE_MS: u64 = 30_000;
pub const DEFAULT_AGENT_TIMEOUT_MS: u64 = 20_000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_timeout() -> u64 {
    DEFAULT_AGENT_TIMEOUT_MS
}

fn default_template_id() -> String {
    DEFAULT_TEMPLATE_ID.to_string()
}

/// A stub's label pool, either inline or the name of a `[label_pools]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PoolRef {
    Inline(Vec<String>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transport {
    HttpLlm {
        endpoint: String,
        /// Name of the environment variable holding the bearer token.
        token_env: String,
        model: String,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
        #[serde(default)]
        retries: u32,
    },
    Stub {
        seed: u64,
        target_accuracy: f64,
        label_pool: PoolRef,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
        /// Artificial latency before the stub answers.
        #[serde(default)]
        delay_ms: u64,
        /// Makes the stub fail every call with this status.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        fail_with: Option<AgentStatus>,
    },
    Replay {
        log: PathBuf,
        #[serde(default = "default_timeout")]
        timeout_ms: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentDescriptor {
    pub agent_id: AgentId,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default = "default_template_id")]
    pub prompt_template_id: String,
    #[serde(flatten)]
    pub transport: Transport,
}

impl AgentDescriptor {
    pub fn timeout_ms(&self) -> u64 {
        match &self.transport {
            Transport::HttpLlm { timeout_ms, .. }
            | Transport::Stub { timeout_ms, .. }
            | Transport::Replay { timeout_ms, .. } => *timeout_ms,
        }
    }

    pub fn display_name(&self) -> &str {
        self.display_name.as_deref().unwrap_or(self.agent_id.as_str())
    }

    pub fn kind(&self) -> &'static str {
        match self.transport {
            Transport::HttpLlm { .. } => "http_llm",
            Transport::Stub { .. } => "stub",
            Transport::Replay { .. } => "replay",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    deadline_ms: Option<u64>,
    #[serde(default)]
    max_hypotheses: Option<usize>,
    #[serde(default)]
    smoothing: Option<f64>,
    #[serde(default)]
    default_strategy: Option<Strategy>,
    #[serde(default)]
    synonyms: Option<PathBuf>,
    #[serde(default)]
    api_token_env: Option<String>,
    #[serde(default)]
    label_pools: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    templates: Vec<PromptTemplate>,
    #[serde(default)]
    agents: Vec<AgentDescriptor>,
}

/// A validated configuration with replay logs and the synonym table loaded.
#[derive(Debug, Clone)]
pub struct Config {
    pub deadline_ms: u64,
    pub max_hypotheses: usize,
    pub smoothing: f64,
    pub default_strategy: Strategy,
    pub api_token_env: Option<String>,
    pub synonyms: SynonymTable,
    pub templates: BTreeMap<String, PromptTemplate>,
    pub agents: Vec<AgentDescriptor>,
    /// Stub profiles with pool references resolved.
    pub stubs: BTreeMap<AgentId, StubProfile>,
    pub replay_logs: BTreeMap<AgentId, ReplayLog>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse { path: path.into(), message },
            other => other,
        })
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })?;
        Self::from_raw(raw, base_dir)
    }

    fn from_raw(raw: RawConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        let deadline_ms = raw.deadline_ms.unwrap_or(DEFAULT_DEADLINE_MS);
        if deadline_ms == 0 {
            return Err(invalid("deadline_ms must be positive".into()));
        }
        let max_hypotheses = raw.max_hypotheses.unwrap_or(DEFAULT_MAX_HYPOTHESES);
        if max_hypotheses == 0 {
            return Err(invalid("max_hypotheses must be at least 1".into()));
        }
        let smoothing = raw.smoothing.unwrap_or(medas_core::meta::DEFAULT_SMOOTHING);
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(invalid("smoothing must be positive".into()));
        }

        let synonyms = match raw.synonyms {
            Some(p) => {
                let path = base_dir.join(p);
                let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                SynonymTable::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?
            }
            None => SynonymTable::empty(),
        };

        let mut templates = BTreeMap::new();
        templates.insert(DEFAULT_TEMPLATE_ID.to_string(), PromptTemplate::default_template());
        for t in raw.templates {
            templates.insert(t.template_id().to_string(), t);
        }

        if raw.agents.is_empty() {
            return Err(invalid("no agents configured".into()));
        }
        let mut seen = BTreeSet::new();
        let mut stubs = BTreeMap::new();
        let mut replay_logs = BTreeMap::new();
        let mut agents = Vec::with_capacity(raw.agents.len());
        for mut agent in raw.agents {
            if !seen.insert(agent.agent_id.clone()) {
                return Err(invalid(format!("duplicate agent_id {}", agent.agent_id)));
            }
            if agent.timeout_ms() == 0 {
                return Err(invalid(format!("agent {}: timeout_ms must be positive", agent.agent_id)));
            }
            if !templates.contains_key(&agent.prompt_template_id) {
                return Err(invalid(format!(
                    "agent {}: unknown prompt_template_id {}",
                    agent.agent_id, agent.prompt_template_id
                )));
            }
            match &mut agent.transport {
                Transport::HttpLlm { endpoint, token_env, .. } => {
                    if endpoint.trim().is_empty() || token_env.trim().is_empty() {
                        return Err(invalid(format!("agent {}: endpoint and token_env are required", agent.agent_id)));
                    }
                }
                Transport::Stub { seed, target_accuracy, label_pool, .. } => {
                    let pool = match label_pool {
                        PoolRef::Inline(labels) => labels.clone(),
                        PoolRef::Named(name) => raw
                            .label_pools
                            .get(name)
                            .cloned()
                            .ok_or_else(|| invalid(format!("agent {}: unknown label pool {name}", agent.agent_id)))?,
                    };
                    let profile = StubProfile { seed: *seed, target_accuracy: *target_accuracy, label_pool: pool };
                    profile.validate().map_err(|e| invalid(format!("agent {}: {e}", agent.agent_id)))?;
                    stubs.insert(agent.agent_id.clone(), profile);
                }
                Transport::Replay { log, .. } => {
                    let path = base_dir.join(&*log);
                    let text =
                        std::fs::read_to_string(&path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
                    let parsed = ReplayLog::parse(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
                    *log = path;
                    replay_logs.insert(agent.agent_id.clone(), parsed);
                }
            }
            agents.push(agent);
        }

        Ok(Self {
            deadline_ms,
            max_hypotheses,
            smoothing,
            default_strategy: raw.default_strategy.unwrap_or(Strategy::Top1WeightedVote),
            api_token_env: raw.api_token_env,
            synonyms,
            templates,
            agents,
            stubs,
            replay_logs,
        })
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.agent_id.clone()).collect()
    }

    /// `token_env` names of live agents whose variable is unset or empty.
    pub fn missing_credentials(&self) -> Vec<(AgentId, String)> {
        self.agents
            .iter()
            .filter_map(|a| match &a.transport {
                Transport::HttpLlm { token_env, .. }
                    if std::env::var(token_env).map(|v| v.is_empty()).unwrap_or(true) =>
                {
                    Some((a.agent_id.clone(), token_env.clone()))
                }
                _ => None,
            })
            .collect()
    }

    pub fn has_live_agents(&self) -> bool {
        self.agents.iter().any(|a| matches!(a.transport, Transport::HttpLlm { .. }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STUBS: &str = r#"
        deadline_ms = 5000
        [label_pools]
        resp = ["pneumonia", "pulmonary embolism", "asthma"]

        [[agents]]
        agent_id = "a"
        kind = "stub"
        seed = 1
        target_accuracy = 0.7
        label_pool = "resp"

        [[agents]]
        agent_id = "b"
        display_name = "Agent B"
        kind = "stub"
        seed = 2
        target_accuracy = 0.4
        label_pool = ["sepsis", "uti"]
        timeout_ms = 50
        delay_ms = 10
    "#;

    #[test]
    fn loads_stub_agents_and_pools() {
        let config = Config::from_toml(STUBS, Path::new(".")).unwrap();
        assert_eq!(config.deadline_ms, 5000);
        assert_eq!(config.max_hypotheses, 5);
        assert_eq!(config.agent_ids(), [AgentId::from("a"), AgentId::from("b")]);
        assert_eq!(config.stubs[&AgentId::from("a")].label_pool.len(), 3);
        assert_eq!(config.agents[1].timeout_ms(), 50);
        assert_eq!(config.agents[0].timeout_ms(), DEFAULT_AGENT_TIMEOUT_MS);
        assert_eq!(config.agents[1].display_name(), "Agent B");
        assert!(config.templates.contains_key("default"));
    }

    #[test]
    fn rejects_invalid_configs() {
        let dup = STUBS.replace("agent_id = \"b\"", "agent_id = \"a\"");
        assert!(matches!(Config::from_toml(&dup, Path::new(".")), Err(ConfigError::Invalid(_))));
        let zero = STUBS.replace("timeout_ms = 50", "timeout_ms = 0");
        assert!(Config::from_toml(&zero, Path::new(".")).is_err());
        let pool = STUBS.replace("label_pool = \"resp\"", "label_pool = \"nope\"");
        assert!(Config::from_toml(&pool, Path::new(".")).is_err());
        let accuracy = STUBS.replace("0.7", "1.7");
        assert!(Config::from_toml(&accuracy, Path::new(".")).is_err());
        assert!(Config::from_toml("deadline_ms = 10", Path::new(".")).is_err());
        assert!(matches!(Config::from_toml("agents = 3", Path::new(".")), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn http_agents_reference_credentials_by_name() {
        let text = r#"
            [[agents]]
            agent_id = "gpt"
            kind = "http_llm"
            endpoint = "https://example.invalid/v1/chat/completions"
            token_env = "MEDAS_TEST_TOKEN_THAT_IS_NEVER_SET"
            model = "gpt-4o"
            retries = 1
        "#;
        let config = Config::from_toml(text, Path::new(".")).unwrap();
        assert!(config.has_live_agents());
        assert_eq!(config.missing_credentials(), [(AgentId::from("gpt"), "MEDAS_TEST_TOKEN_THAT_IS_NEVER_SET".into())]);
    }

    #[test]
    fn custom_templates_are_validated() {
        let text = format!(
            "{STUBS}\n[[templates]]\ntemplate_id = \"terse\"\nbody = \"no placeholder\"\n"
        );
        assert!(Config::from_toml(&text, Path::new(".")).is_err());
        let text = format!("{STUBS}\n[[templates]]\ntemplate_id = \"terse\"\nbody = \"Case: {{{{case_text}}}}\"\n");
        let config = Config::from_toml(&text, Path::new(".")).unwrap();
        assert!(config.templates.contains_key("terse"));
    }
}
