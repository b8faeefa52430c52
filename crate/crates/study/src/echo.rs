//! A stand-in chat-completion endpoint for local runs and tests. It echoes a
//! short quoted prefix of the last message, so an inquirer pointed at it
//! always yields an extractable prompt.

use axum::routing::post;
use axum::{Json, Router};
use roleplay_core::subjects::{ChatCompletionRequest, ChatCompletionResponse, ChatMessage};

pub const ROUTE: &str = "/v1/chat/completions";
const ECHO_WORDS: usize = 8;

pub fn router() -> Router {
    Router::new().route(ROUTE, post(complete))
}

/// The reply the echo endpoint gives for a message list.
pub fn echo_reply(messages: &[ChatMessage]) -> String {
    let last = messages.last().map_or("", |m| m.content.as_str());
    let words: Vec<&str> = last.split_whitespace().map(|w| w.trim_matches(|c| c == '"' || c == '\u{201c}' || c == '\u{201d}')).take(ECHO_WORDS).collect();
    let head = if words.is_empty() { "nothing" } else { &words.join(" ") };
    format!("Echo of message {}: \"{head}\"", messages.len())
}

async fn complete(Json(req): Json<ChatCompletionRequest>) -> Json<ChatCompletionResponse> {
    let reply = echo_reply(&req.messages);
    let completion_tokens = reply.split_whitespace().count() as u64;
    let prompt_tokens = req.messages.iter().map(|m| m.content.split_whitespace().count() as u64).sum();
    Json(ChatCompletionResponse {
        choices: vec![roleplay_core::subjects::CompletionChoice { message: ChatMessage::assistant(reply) }],
        usage: Some(roleplay_core::subjects::Usage {
            prompt_tokens,
            completion_tokens,
            total_tokens: prompt_tokens + completion_tokens,
        }),
    })
}
