use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use super::{validate_messages, BackendError, ChatExchange, ChatMessage, GenerationParams, Subject};

/// Request body for an OpenAI-style chat-completion route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatCompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stream: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    #[serde(default)]
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatCompletionResponse {
    pub choices: Vec<Choice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub message: ChatMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, base_delay: Duration::from_millis(250) }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

/// Subject backed by an HTTP chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct RemoteChat {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    gen: GenerationParams,
    bearer: Option<String>,
    retry: RetryPolicy,
}

impl RemoteChat {
    pub fn new(endpoint: String, model: String, gen: GenerationParams, bearer: Option<String>) -> Self {
        RemoteChat { client: reqwest::Client::new(), endpoint, model, gen, bearer, retry: RetryPolicy::default() }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// The request body that [`RemoteChat::exchange`] sends. With sampling
    /// disabled the temperature is pinned to zero and top_p omitted.
    pub fn request(&self, messages: &[ChatMessage]) -> ChatCompletionRequest {
        let (temperature, top_p) = if self.gen.sampling_enabled {
            (self.gen.temperature, self.gen.top_p)
        } else {
            (Some(0.0), None)
        };
        ChatCompletionRequest {
            model: self.model.clone(),
            messages: messages.to_vec(),
            max_tokens: self.gen.max_new_tokens,
            temperature,
            top_p,
            seed: self.gen.seed,
            stream: false,
        }
    }

    pub async fn exchange(&self, messages: &[ChatMessage]) -> Result<ChatExchange, BackendError> {
        validate_messages(messages)?;
        let body = self.request(messages);
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.send_once(&body, attempt).await {
                Ok(resp) => {
                    let reply = resp
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| BackendError::MalformedResponse("no choices".into()))?;
                    return Ok(ChatExchange { messages: messages.to_vec(), reply, usage: resp.usage });
                }
                Err((err, transient)) => {
                    if !transient || attempt >= self.retry.max_attempts {
                        return Err(err);
                    }
                    tracing::warn!(attempt, error = %err, "retrying chat completion");
                    tokio::time::sleep(self.retry.delay(attempt)).await;
                }
            }
        }
    }

    /// One HTTP round trip. The flag says whether the failure may be retried.
    async fn send_once(
        &self,
        body: &ChatCompletionRequest,
        attempts: u32,
    ) -> Result<ChatCompletionResponse, (BackendError, bool)> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(token) = &self.bearer {
            req = req.bearer_auth(token);
        }
        let resp = req.send().await.map_err(|e| {
            let transient = e.is_connect() || e.is_timeout() || e.is_request();
            (BackendError::Transport { message: e.to_string(), attempts }, transient)
        })?;
        let status = resp.status();
        if !status.is_success() {
            let transient = status.is_server_error() || status.as_u16() == 429;
            let text = resp.text().await.unwrap_or_default();
            return Err((BackendError::Status { status: status.as_u16(), body: text, attempts }, transient));
        }
        resp.json::<ChatCompletionResponse>()
            .await
            .map_err(|e| (BackendError::MalformedResponse(e.to_string()), false))
    }
}

#[async_trait]
impl Subject for RemoteChat {
    async fn complete(&mut self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        self.exchange(messages).await.map(|x| x.reply)
    }
}
