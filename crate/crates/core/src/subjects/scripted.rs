use std::collections::BTreeMap;
use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{validate_messages, BackendError, ChatMessage, Subject};

/// Replies for a scripted subject: served in order, except that a reply
/// keyed by the digest of the incoming messages (see [`message_digest`])
/// takes precedence and does not advance the cursor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default)]
    pub replies: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_hash: BTreeMap<String, String>,
}

impl Transcript {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Transcript { model_id: None, replies: replies.into_iter().map(Into::into).collect(), by_hash: BTreeMap::new() }
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = Some(id.into());
        self
    }

    /// Reads a transcript from JSON (`.json`) or TOML (anything else).
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Script { path: path.display().to_string(), message };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| err(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| err(e.to_string()))
        }
    }
}

/// Hex SHA-256 of the JSON encoding of `messages`.
pub fn message_digest(messages: &[ChatMessage]) -> String {
    let encoded = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&encoded))
}

/// Deterministic stand-in for a model.
#[derive(Debug, Clone)]
pub struct ScriptedSubject {
    transcript: Transcript,
    cursor: usize,
    received: Vec<Vec<ChatMessage>>,
}

impl ScriptedSubject {
    pub fn new(transcript: Transcript) -> Self {
        ScriptedSubject { transcript, cursor: 0, received: Vec::new() }
    }

    /// Every message list this subject has been asked to complete.
    pub fn received(&self) -> &[Vec<ChatMessage>] {
        &self.received
    }

    fn next_reply(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        validate_messages(messages)?;
        self.received.push(messages.to_vec());
        if !self.transcript.by_hash.is_empty() {
            if let Some(reply) = self.transcript.by_hash.get(&message_digest(messages)) {
                return Ok(reply.clone());
            }
        }
        let reply = self
            .transcript
            .replies
            .get(self.cursor)
            .cloned()
            .ok_or(BackendError::ScriptExhausted { consumed: self.cursor })?;
        self.cursor += 1;
        Ok(reply)
    }
}

#[async_trait]
impl Subject for ScriptedSubject {
    async fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.next_reply(messages)
    }
}

#[async_trait]
impl Subject for &mut ScriptedSubject {
    async fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.next_reply(messages)
    }
}
