//! Dialogue participants. A [`Subject`] turns a role-structured message list
//! into one reply; [`SubjectSpec`] is the serializable configuration that
//! builds one, either against a remote chat-completion endpoint or from a
//! scripted transcript.

mod context;
mod remote;
mod scripted;

use std::path::PathBuf;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

pub use context::{build_inquirer_context, build_responder_context};
pub use remote::{ChatCompletionRequest, ChatCompletionResponse, Choice as CompletionChoice, RemoteChat, RetryPolicy, Usage};
pub use scripted::{message_digest, ScriptedSubject, Transcript};

use crate::templates::FamilyId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::System, content: content.into() }
    }
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::User, content: content.into() }
    }
    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: ChatRole::Assistant, content: content.into() }
    }
}

/// Checks that at most the first message is a system message and that the
/// remaining roles alternate.
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), BackendError> {
    let body = match messages.first() {
        Some(m) if m.role == ChatRole::System => &messages[1..],
        _ => messages,
    };
    if body.iter().any(|m| m.role == ChatRole::System) {
        return Err(BackendError::MalformedRequest("system message after the first position".into()));
    }
    if let Some(w) = body.windows(2).find(|w| w[0].role == w[1].role) {
        return Err(BackendError::MalformedRequest(format!("consecutive {:?} messages", w[0].role)));
    }
    if messages.is_empty() {
        return Err(BackendError::MalformedRequest("empty message list".into()));
    }
    Ok(())
}

/// A completed request/reply pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<ChatMessage>,
    pub reply: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    #[error("endpoint returned HTTP {status} after {attempts} attempt(s): {body}")]
    Status { status: u16, body: String, attempts: u32 },
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),
    #[error("malformed request: {0}")]
    MalformedRequest(String),
    #[error("scripted transcript exhausted after {consumed} repl(ies)")]
    ScriptExhausted { consumed: usize },
    #[error("failed to load transcript {path}: {message}")]
    Script { path: String, message: String },
    #[error("credential environment variable {0} is not set")]
    MissingCredential(String),
}

impl BackendError {
    /// Attempts made before giving up, for transport-level failures.
    pub fn attempts(&self) -> Option<u32> {
        match self {
            BackendError::Transport { attempts, .. } | BackendError::Status { attempts, .. } => Some(*attempts),
            _ => None,
        }
    }
}

/// A dialogue participant.
#[async_trait]
pub trait Subject: Send {
    async fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubjectRole {
    Inquirer,
    Responder,
}

/// Sampling configuration sent with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default = "default_true")]
    pub sampling_enabled: bool,
    pub max_new_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    /// Fixed seed; when absent the dialogue's grid seed is sent instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_true() -> bool {
    true
}

pub const INQUIRER_MAX_NEW_TOKENS: u32 = 1000;
pub const RESPONDER_MAX_NEW_TOKENS: u32 = 4000;

impl GenerationParams {
    pub fn for_role(role: SubjectRole) -> Self {
        let max_new_tokens = match role {
            SubjectRole::Inquirer => INQUIRER_MAX_NEW_TOKENS,
            SubjectRole::Responder => RESPONDER_MAX_NEW_TOKENS,
        };
        GenerationParams { sampling_enabled: true, max_new_tokens, temperature: None, top_p: None, seed: None }
    }
}

/// How a script is supplied: a file on disk or inline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptSource {
    File { path: PathBuf },
    Inline(Transcript),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    RemoteChat {
        /// Full URL of the chat-completion route.
        endpoint: String,
        model: String,
        /// Name of the environment variable holding a bearer token.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        auth_env: Option<String>,
    },
    Scripted(ScriptSource),
}

/// Whether to send role-structured messages (markup stripped from the
/// templates) or one pre-wrapped text blob for endpoints that do no chat
/// formatting of their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChatFormat {
    #[default]
    Messages,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSpec {
    pub role: SubjectRole,
    pub backend: Backend,
    pub family: FamilyId,
    pub gen: GenerationParams,
    /// Self-reply markers; when absent the responder family's markers apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub markers: Option<Vec<String>>,
    #[serde(default)]
    pub format: ChatFormat,
}

#[derive(Debug, Clone, Deserialize)]
struct SpecFile {
    role: SubjectRole,
    backend: Backend,
    family: FamilyId,
    #[serde(default)]
    gen: Option<GenerationParams>,
    #[serde(default)]
    markers: Option<Vec<String>>,
    #[serde(default)]
    format: ChatFormat,
}

impl SubjectSpec {
    pub fn new(role: SubjectRole, backend: Backend, family: FamilyId) -> Self {
        SubjectSpec { role, backend, family, gen: GenerationParams::for_role(role), markers: None, format: ChatFormat::Messages }
    }

    pub fn scripted(role: SubjectRole, family: FamilyId, transcript: Transcript) -> Self {
        Self::new(role, Backend::Scripted(ScriptSource::Inline(transcript)), family)
    }

    /// Parses a TOML spec file; `gen` defaults by role when omitted.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        let raw: SpecFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let gen = raw.gen.unwrap_or_else(|| GenerationParams::for_role(raw.role));
        if gen.max_new_tokens == 0 {
            return Err("gen.max_new_tokens must be at least 1".into());
        }
        Ok(SubjectSpec { role: raw.role, backend: raw.backend, family: raw.family, gen, markers: raw.markers, format: raw.format })
    }

    pub fn model_id(&self) -> String {
        match &self.backend {
            Backend::RemoteChat { model, .. } => model.clone(),
            Backend::Scripted(ScriptSource::Inline(t)) => t.model_id.clone().unwrap_or_else(|| "scripted".into()),
            Backend::Scripted(ScriptSource::File { path }) => {
                Transcript::load(path).ok().and_then(|t| t.model_id).unwrap_or_else(|| "scripted".into())
            }
        }
    }

    /// Builds a fresh subject for one dialogue. Scripted subjects start their
    /// cursor at zero; `seed` is sent to remote endpoints unless `gen.seed`
    /// is already set.
    pub fn instantiate(&self, seed: u64) -> Result<Box<dyn Subject>, BackendError> {
        match &self.backend {
            Backend::Scripted(ScriptSource::Inline(t)) => Ok(Box::new(ScriptedSubject::new(t.clone()))),
            Backend::Scripted(ScriptSource::File { path }) => Ok(Box::new(ScriptedSubject::new(Transcript::load(path)?))),
            Backend::RemoteChat { endpoint, model, auth_env } => {
                let token = match auth_env {
                    Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingCredential(var.clone()))?),
                    None => None,
                };
                let mut gen = self.gen.clone();
                gen.seed.get_or_insert(seed);
                Ok(Box::new(RemoteChat::new(endpoint.clone(), model.clone(), gen, token)))
            }
        }
    }
}
