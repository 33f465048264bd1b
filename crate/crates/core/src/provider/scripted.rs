use std::collections::HashMap;
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use super::{check_messages, ChatMessage, ChatProvider, DecodingParams, ProviderError, Role};

/// Ordered canned responses with a cursor.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProviderScript {
    pub responses: Vec<String>,
    pub cursor: usize,
}

impl ProviderScript {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: responses.into_iter().map(Into::into).collect(),
            cursor: 0,
        }
    }

    fn next(&mut self) -> Option<String> {
        let r = self.responses.get(self.cursor).cloned()?;
        self.cursor += 1;
        Some(r)
    }

    pub fn remaining(&self) -> usize {
        self.responses.len() - self.cursor
    }
}

/// Replays a script, one response per call, and records every request.
#[derive(Debug)]
pub struct ScriptedChat {
    name: String,
    state: Mutex<ScriptState>,
}

#[derive(Debug, Default)]
struct ScriptState {
    script: ProviderScript,
    calls: Vec<Vec<ChatMessage>>,
}

impl ScriptedChat {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            name: "scripted".into(),
            state: Mutex::new(ScriptState {
                script: ProviderScript::new(responses),
                calls: Vec::new(),
            }),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Requests received so far, in order.
    pub fn calls(&self) -> Vec<Vec<ChatMessage>> {
        self.state.lock().expect("script lock").calls.clone()
    }

    pub fn call_count(&self) -> usize {
        self.state.lock().expect("script lock").calls.len()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("script lock").script.remaining()
    }
}

impl ChatProvider for ScriptedChat {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, messages: &[ChatMessage], _params: &DecodingParams) -> Result<String, ProviderError> {
        check_messages(&self.name, messages)?;
        let mut state = self.state.lock().expect("script lock");
        state.calls.push(messages.to_vec());
        let consumed = state.script.cursor;
        state.script.next().ok_or_else(|| ProviderError::ScriptExhausted {
            provider: self.name.clone(),
            consumed,
        })
    }
}

/// Lowercase hex SHA-256 of a user payload.
pub fn payload_digest(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

/// One script per document, selected by the SHA-256 of the first user
/// message. Lets extraction run concurrently across documents while each
/// conversation stays deterministic.
#[derive(Debug, Default)]
pub struct DocumentScriptedChat {
    scripts: HashMap<String, Mutex<ProviderScript>>,
}

impl DocumentScriptedChat {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers the responses returned for conversations whose first user
    /// message equals `user_payload`.
    pub fn insert<I, S>(&mut self, user_payload: impl Into<String>, responses: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.insert_digest(payload_digest(&user_payload.into()), responses);
    }

    /// Like [`insert`](Self::insert), keyed by a precomputed
    /// [`payload_digest`].
    pub fn insert_digest<I, S>(&mut self, digest: impl Into<String>, responses: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.scripts
            .insert(digest.into(), Mutex::new(ProviderScript::new(responses)));
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }
}

impl ChatProvider for DocumentScriptedChat {
    fn name(&self) -> &str {
        "document-scripted"
    }

    fn chat(&self, messages: &[ChatMessage], _params: &DecodingParams) -> Result<String, ProviderError> {
        check_messages(self.name(), messages)?;
        let key = messages
            .iter()
            .find(|m| m.role == Role::User)
            .map(|m| payload_digest(&m.content))
            .unwrap_or_default();
        let script = self.scripts.get(&key).ok_or_else(|| ProviderError::InvalidRequest {
            provider: self.name().to_string(),
            message: "no script registered for this document".into(),
        })?;
        let mut script = script.lock().expect("script lock");
        let consumed = script.cursor;
        script.next().ok_or_else(|| ProviderError::ScriptExhausted {
            provider: self.name().to_string(),
            consumed,
        })
    }
}

/// Always answers with the same text.
#[derive(Debug, Clone)]
pub struct FixedChat {
    reply: String,
}

impl FixedChat {
    pub fn new(reply: impl Into<String>) -> Self {
        Self { reply: reply.into() }
    }
}

impl ChatProvider for FixedChat {
    fn name(&self) -> &str {
        "fixed"
    }

    fn chat(&self, messages: &[ChatMessage], _params: &DecodingParams) -> Result<String, ProviderError> {
        check_messages(self.name(), messages)?;
        Ok(self.reply.clone())
    }
}
