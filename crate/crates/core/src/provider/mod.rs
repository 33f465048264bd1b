//! Boundary to language and embedding models.
//!
//! Everything above this module talks to models through [`ChatProvider`] and
//! [`EmbeddingProvider`]. The remote implementation speaks a small JSON wire
//! format over HTTP; the scripted and bag-of-tokens implementations are
//! deterministic doubles used for replayable tests and offline demos.

mod bag;
mod remote;
mod scripted;

pub use bag::{tokenize, BagOfTokensEmbedder};
pub use remote::{RemoteConfig, RemoteProvider, DEFAULT_API_KEY_ENV};
pub(crate) use remote::is_timeout;
pub use scripted::{payload_digest, DocumentScriptedChat, FixedChat, ProviderScript, ScriptedChat};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    /// Tool result; the first line names the tool that produced it.
    pub fn tool(tool_name: &str, observation: &str) -> Self {
        Self {
            role: Role::Tool,
            content: format!("tool: {tool_name}\n{observation}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_output_chars: usize,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            max_output_chars: 8_192,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("{provider}: authentication failed: {message}")]
    Auth { provider: String, message: String },
    #[error("{provider}: network error: {message}")]
    Network { provider: String, message: String },
    #[error("{provider}: request timed out")]
    Timeout { provider: String },
    #[error("{provider}: rate limited")]
    RateLimited { provider: String },
    #[error("{provider}: script exhausted after {consumed} responses")]
    ScriptExhausted { provider: String, consumed: usize },
    #[error("{provider}: invalid request: {message}")]
    InvalidRequest { provider: String, message: String },
    #[error("{provider}: malformed response: {message}")]
    BadResponse { provider: String, message: String },
    #[error("{provider}: text has no in-vocabulary tokens")]
    DegenerateEmbedding { provider: String },
}

/// Precondition shared by every chat implementation: the conversation is
/// non-empty, opens with a system message, and system/user turns carry text.
pub fn check_messages(provider: &str, messages: &[ChatMessage]) -> Result<(), ProviderError> {
    let invalid = |message: &str| ProviderError::InvalidRequest {
        provider: provider.to_string(),
        message: message.to_string(),
    };
    match messages.first() {
        None => return Err(invalid("no messages")),
        Some(m) if m.role != Role::System => return Err(invalid("first message must be system")),
        _ => {}
    }
    if messages
        .iter()
        .any(|m| matches!(m.role, Role::System | Role::User) && m.content.trim().is_empty())
    {
        return Err(invalid("system and user messages must be non-empty"));
    }
    Ok(())
}

pub trait ChatProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the assistant's reply to `messages`.
    fn chat(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, ProviderError>;
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    /// Raw, possibly unnormalized embedding of `text`.
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

impl<T: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn chat(&self, messages: &[ChatMessage], params: &DecodingParams) -> Result<String, ProviderError> {
        (**self).chat(messages, params)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<T> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed(text)
    }
}
