//! Application configuration.
//!
//! The config file is TOML. Every key is optional; missing keys take the
//! defaults below. Relative paths are resolved against the directory of the
//! config file.
//!
//! ```toml
//! store_path = "data/marketlens.sqlite"     # job store (SQLite)
//! sessions_path = "data/sessions.sqlite"    # chat sessions and charts (SQLite)
//! skills_path = "skills.json"               # skill library; unset = use the library stored in the job store
//! bind = "127.0.0.1:8080"                   # HTTP listen address
//! cors_origins = ["http://localhost:5173"]  # origins allowed to call the API; empty = none
//!
//! [provider]
//! chat = "remote"                # "remote" or "scripted"
//! embedder = "bag-of-tokens"     # "bag-of-tokens" (vocabulary from the skill library) or "remote"
//! chat_endpoint = "http://127.0.0.1:8000/v1/chat"
//! embed_endpoint = "http://127.0.0.1:8000/v1/embed"
//! model = "default"
//! timeout_ms = 30000
//! api_key_env = "MARKETLENS_LLM_API_KEY"  # name of the variable holding the key
//! auth_header = "Authorization"
//! agent_script = "agent.json"            # scripted chat: JSON array of agent replies
//! advisor_script = "advisor.json"        # scripted chat: JSON array of advisor replies
//! extraction_script = "extraction.json"  # scripted chat: per-document extraction script
//!
//! [agent]
//! max_steps = 8
//! max_observation_chars = 4000
//! k_labels = 10
//! max_rows = 500
//! query_timeout_ms = 5000
//! ```

use std::path::{Path, PathBuf};

use marketlens_core::agent::{DEFAULT_MAX_STEPS, MAX_OBSERVATION_CHARS};
use marketlens_core::domain::DEFAULT_LABELS_PER_JOB;
use marketlens_core::provider::{RemoteConfig, DEFAULT_API_KEY_ENV};
use marketlens_core::store::StoreConfig;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChatKind {
    Remote,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderKind {
    BagOfTokens,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderSettings {
    pub chat: ChatKind,
    pub embedder: EmbedderKind,
    pub chat_endpoint: String,
    pub embed_endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    pub api_key_env: String,
    pub auth_header: String,
    pub agent_script: Option<PathBuf>,
    pub advisor_script: Option<PathBuf>,
    pub extraction_script: Option<PathBuf>,
}

impl Default for ProviderSettings {
    fn default() -> Self {
        let remote = RemoteConfig::default();
        Self {
            chat: ChatKind::Remote,
            embedder: EmbedderKind::BagOfTokens,
            chat_endpoint: remote.chat_endpoint,
            embed_endpoint: remote.embed_endpoint,
            model: remote.model,
            timeout_ms: remote.timeout_ms,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            auth_header: remote.auth_header,
            agent_script: None,
            advisor_script: None,
            extraction_script: None,
        }
    }
}

impl ProviderSettings {
    pub fn remote(&self) -> RemoteConfig {
        RemoteConfig {
            chat_endpoint: self.chat_endpoint.clone(),
            embed_endpoint: self.embed_endpoint.clone(),
            model: self.model.clone(),
            timeout_ms: self.timeout_ms,
            api_key_env: self.api_key_env.clone(),
            auth_header: self.auth_header.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSettings {
    pub max_steps: usize,
    pub max_observation_chars: usize,
    pub k_labels: usize,
    pub max_rows: usize,
    pub query_timeout_ms: u64,
}

impl Default for AgentSettings {
    fn default() -> Self {
        let store = StoreConfig::default();
        Self {
            max_steps: DEFAULT_MAX_STEPS,
            max_observation_chars: MAX_OBSERVATION_CHARS,
            k_labels: DEFAULT_LABELS_PER_JOB,
            max_rows: store.max_rows,
            query_timeout_ms: store.query_timeout.as_millis() as u64,
        }
    }
}

impl AgentSettings {
    pub fn store_config(&self) -> StoreConfig {
        StoreConfig {
            max_rows: self.max_rows,
            query_timeout: std::time::Duration::from_millis(self.query_timeout_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub store_path: PathBuf,
    pub sessions_path: PathBuf,
    pub skills_path: Option<PathBuf>,
    pub bind: String,
    pub cors_origins: Vec<String>,
    pub provider: ProviderSettings,
    pub agent: AgentSettings,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            store_path: PathBuf::from("data/marketlens.sqlite"),
            sessions_path: PathBuf::from("data/sessions.sqlite"),
            skills_path: None,
            bind: "127.0.0.1:8080".into(),
            cors_origins: vec!["http://localhost:5173".into()],
            provider: ProviderSettings::default(),
            agent: AgentSettings::default(),
        }
    }
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Parses TOML text, resolving relative paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut config: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<text>".into(),
            message: e.message().to_string(),
        })?;
        config.resolve(base);
        config.check()?;
        Ok(config)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && p.as_os_str() != ":memory:" {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.store_path);
        fix(&mut self.sessions_path);
        for p in [
            &mut self.skills_path,
            &mut self.provider.agent_script,
            &mut self.provider.advisor_script,
            &mut self.provider.extraction_script,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let a = &self.agent;
        for (key, v) in [
            ("agent.max_steps", a.max_steps as u64),
            ("agent.max_observation_chars", a.max_observation_chars as u64),
            ("agent.k_labels", a.k_labels as u64),
            ("agent.max_rows", a.max_rows as u64),
            ("agent.query_timeout_ms", a.query_timeout_ms),
            ("provider.timeout_ms", self.provider.timeout_ms),
        ] {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{key} must be positive")));
            }
        }
        if self.bind.parse::<std::net::SocketAddr>().is_err() {
            return Err(ConfigError::Invalid(format!("bind is not a socket address: {}", self.bind)));
        }
        for p in [
            &self.skills_path,
            &self.provider.agent_script,
            &self.provider.advisor_script,
            &self.provider.extraction_script,
        ]
        .into_iter()
        .flatten()
        {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("no such file: {}", p.display())));
            }
        }
        Ok(())
    }
}
