//! Chat-completion clients.
//!
//! Every LLM interaction goes through [`ChatClient`]. Two implementations
//! ship with the crate: [`HttpChatClient`] speaks the OpenAI-compatible
//! chat-completions protocol, and [`ScriptedClient`] replays a transcript
//! keyed by request digest and refuses anything it has not seen.

mod http;
mod calllog;
mod scripted;

pub use http::{HttpChatClient, HttpConfig, ENV_API_KEY, ENV_ENDPOINT, ENV_MODEL};
pub use calllog::{CallLog, CallRecord, Logged};
pub use scripted::{ScriptedClient, TranscriptEntry};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}")]
    Status { status: u16 },
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("no scripted response for request {digest} (first user line: {preview:?})")]
    UnexpectedRequest { digest: String, preview: String },
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("client not configured: {0}")]
    NotConfigured(String),
}

pub trait ChatClient: Send + Sync {
    /// Sends one conversation and returns the assistant text.
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        (**self).send(messages)
    }
}

/// SHA-256 over the compact JSON encoding of the message list.
pub fn request_digest(messages: &[ChatMessage]) -> String {
    let bytes = serde_json::to_vec(messages).expect("messages serialize");
    hex::encode(Sha256::digest(&bytes))
}

pub(crate) fn preview(messages: &[ChatMessage]) -> String {
    messages
        .iter()
        .rev()
        .find(|m| m.role == Role::User)
        .and_then(|m| m.content.lines().find(|l| !l.trim().is_empty()))
        .map(|l| l.chars().take(80).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_role_and_content() {
        let a = request_digest(&[ChatMessage::user("hi")]);
        let b = request_digest(&[ChatMessage::system("hi")]);
        let c = request_digest(&[ChatMessage::user("hi ")]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, request_digest(&[ChatMessage::user("hi")]));
        assert_eq!(a.len(), 64);
    }
}
