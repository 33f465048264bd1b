//! Vendor-neutral HTTP provider.
//!
//! Wire format (JSON over POST):
//!
//! * chat request: `{"model", "messages": [{"role", "content"}], "temperature", "max_output_chars"}`;
//!   response: `{"content": "..."}` or an OpenAI-style `{"choices": [{"message": {"content"}}]}`.
//! * embed request: `{"model", "input": "..."}`; response: `{"embedding": [..]}` or
//!   `{"data": [{"embedding": [..]}]}`.
//!
//! The API key is read from the configured environment variable on every
//! call and sent in the configured header (`Bearer <key>` when the header is
//! `Authorization`). It is never logged.

use std::io;
use std::time::Duration;

use serde_json::{json, Value};

use super::{check_messages, ChatMessage, ChatProvider, DecodingParams, EmbeddingProvider, ProviderError};

pub const DEFAULT_API_KEY_ENV: &str = "MARKETLENS_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub chat_endpoint: String,
    pub embed_endpoint: String,
    pub model: String,
    pub timeout_ms: u64,
    pub api_key_env: String,
    pub auth_header: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            chat_endpoint: "http://127.0.0.1:8000/v1/chat".into(),
            embed_endpoint: "http://127.0.0.1:8000/v1/embed".into(),
            model: "default".into(),
            timeout_ms: 30_000,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            auth_header: "Authorization".into(),
        }
    }
}

pub struct RemoteProvider {
    config: RemoteConfig,
    name: String,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("chat_endpoint", &self.config.chat_endpoint)
            .field("embed_endpoint", &self.config.embed_endpoint)
            .field("model", &self.config.model)
            .field("api_key_env", &self.config.api_key_env)
            .finish_non_exhaustive()
    }
}

impl RemoteProvider {
    pub fn new(config: RemoteConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build();
        let name = format!("remote provider ({})", config.chat_endpoint);
        Self { config, name, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn api_key(&self) -> Result<String, ProviderError> {
        match std::env::var(&self.config.api_key_env) {
            Ok(key) if !key.trim().is_empty() => Ok(key),
            _ => Err(ProviderError::Auth {
                provider: self.name.clone(),
                message: format!("environment variable {} is not set", self.config.api_key_env),
            }),
        }
    }

    fn post(&self, endpoint: &str, body: Value) -> Result<Value, ProviderError> {
        let key = self.api_key()?;
        let header_value = if self.config.auth_header.eq_ignore_ascii_case("authorization") {
            format!("Bearer {key}")
        } else {
            key
        };
        tracing::debug!(endpoint, model = %self.config.model, "provider request");
        let response = self
            .agent
            .post(endpoint)
            .set(&self.config.auth_header, &header_value)
            .send_json(body);
        match response {
            Ok(resp) => resp.into_json::<Value>().map_err(|e| ProviderError::BadResponse {
                provider: self.name.clone(),
                message: e.to_string(),
            }),
            Err(ureq::Error::Status(code, _)) => {
                tracing::debug!(endpoint, code, "provider returned error status");
                Err(match code {
                    401 | 403 => ProviderError::Auth {
                        provider: self.name.clone(),
                        message: format!("HTTP {code}"),
                    },
                    429 => ProviderError::RateLimited { provider: self.name.clone() },
                    408 | 504 => ProviderError::Timeout { provider: self.name.clone() },
                    _ => ProviderError::Network {
                        provider: self.name.clone(),
                        message: format!("HTTP {code} from {endpoint}"),
                    },
                })
            }
            Err(ureq::Error::Transport(t)) => {
                if is_timeout(&t) {
                    Err(ProviderError::Timeout { provider: self.name.clone() })
                } else {
                    Err(ProviderError::Network {
                        provider: self.name.clone(),
                        message: format!("{endpoint}: {t}"),
                    })
                }
            }
        }
    }
}

pub(crate) fn is_timeout(t: &ureq::Transport) -> bool {
    let mut source = std::error::Error::source(t);
    while let Some(err) = source {
        if let Some(io_err) = err.downcast_ref::<io::Error>() {
            if matches!(io_err.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) {
                return true;
            }
        }
        source = err.source();
    }
    t.to_string().contains("timed out")
}

impl ChatProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, ProviderError> {
        check_messages(&self.name, messages)?;
        let body = json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": params.temperature,
            "max_output_chars": params.max_output_chars,
        });
        let reply = self.post(&self.config.chat_endpoint, body)?;
        let content = reply
            .get("content")
            .or_else(|| reply.pointer("/choices/0/message/content"))
            .and_then(Value::as_str)
            .ok_or_else(|| ProviderError::BadResponse {
                provider: self.name.clone(),
                message: "response has no content".into(),
            })?;
        Ok(content.chars().take(params.max_output_chars).collect())
    }
}

impl EmbeddingProvider for RemoteProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::InvalidRequest {
                provider: self.name.clone(),
                message: "text is empty".into(),
            });
        }
        let body = json!({ "model": self.config.model, "input": text });
        let reply = self.post(&self.config.embed_endpoint, body)?;
        let values = reply
            .get("embedding")
            .or_else(|| reply.pointer("/data/0/embedding"))
            .and_then(Value::as_array)
            .ok_or_else(|| ProviderError::BadResponse {
                provider: self.name.clone(),
                message: "response has no embedding".into(),
            })?;
        values
            .iter()
            .map(|v| {
                v.as_f64().ok_or_else(|| ProviderError::BadResponse {
                    provider: self.name.clone(),
                    message: "embedding contains a non-number".into(),
                })
            })
            .collect()
    }
}
