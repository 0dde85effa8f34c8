use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{preview, request_digest, ChatClient, ChatMessage, LlmError};

/// One line of a scripted transcript. Extra fields (such as those written by
/// [`super::CallLog`]) are ignored on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request_digest: String,
    pub response_text: String,
}

/// Replays responses keyed by request digest. Unknown requests fail.
#[derive(Debug, Default)]
pub struct ScriptedClient {
    responses: BTreeMap<String, String>,
    calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new(entries: impl IntoIterator<Item = TranscriptEntry>) -> Result<Self, LlmError> {
        let mut responses = BTreeMap::new();
        for e in entries {
            match responses.get(&e.request_digest) {
                Some(prev) if prev != &e.response_text => {
                    return Err(LlmError::Transcript(format!(
                        "conflicting responses for digest {}",
                        e.request_digest
                    )))
                }
                _ => {
                    responses.insert(e.request_digest, e.response_text);
                }
            }
        }
        Ok(Self {
            responses,
            calls: AtomicUsize::new(0),
        })
    }

    /// Scripts a response for an exact message list.
    pub fn with(mut self, messages: &[ChatMessage], response: impl Into<String>) -> Self {
        self.responses.insert(request_digest(messages), response.into());
        self
    }

    /// Parses JSON Lines; blank lines and records without a response are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, LlmError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| LlmError::Transcript(format!("line {}: {e}", n + 1)))?;
            if v.get("response_text").is_some_and(|r| r.is_null()) {
                continue;
            }
            let e: TranscriptEntry = serde_json::from_value(v)
                .map_err(|e| LlmError::Transcript(format!("line {}: {e}", n + 1)))?;
            entries.push(e);
        }
        Self::new(entries)
    }

    pub fn to_jsonl(&self) -> String {
        self.responses
            .iter()
            .map(|(d, r)| {
                serde_json::to_string(&TranscriptEntry {
                    request_digest: d.clone(),
                    response_text: r.clone(),
                })
                .unwrap()
                    + "\n"
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for ScriptedClient {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let digest = request_digest(messages);
        self.responses
            .get(&digest)
            .cloned()
            .ok_or_else(|| LlmError::UnexpectedRequest {
                digest,
                preview: preview(messages),
            })
    }
}
