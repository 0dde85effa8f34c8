use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{request_digest, ChatClient, ChatMessage, LlmError};

/// One client call as persisted in a run transcript. Loadable back into a
/// [`super::ScriptedClient`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub seq: usize,
    pub stage: String,
    pub request_digest: String,
    pub messages: Vec<ChatMessage>,
    pub response_text: Option<String>,
    pub error: Option<String>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Default)]
pub struct CallLog {
    records: Mutex<Vec<CallRecord>>,
}

impl CallLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> Vec<CallRecord> {
        self.records.lock().unwrap().clone()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .lock()
            .unwrap()
            .iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect()
    }

    fn push(&self, mut record: CallRecord) {
        let mut g = self.records.lock().unwrap();
        record.seq = g.len();
        g.push(record);
    }
}

/// Client wrapper that tags each call with a stage name and appends it to a log.
pub struct Logged<'a> {
    inner: &'a dyn ChatClient,
    log: &'a CallLog,
    stage: String,
}

impl<'a> Logged<'a> {
    pub fn new(inner: &'a dyn ChatClient, log: &'a CallLog, stage: impl Into<String>) -> Self {
        Self {
            inner,
            log,
            stage: stage.into(),
        }
    }
}

impl ChatClient for Logged<'_> {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let start = Instant::now();
        let out = self.inner.send(messages);
        self.log.push(CallRecord {
            seq: 0,
            stage: self.stage.clone(),
            request_digest: request_digest(messages),
            messages: messages.to_vec(),
            response_text: out.as_ref().ok().cloned(),
            error: out.as_ref().err().map(|e| e.to_string()),
            elapsed_ms: start.elapsed().as_millis() as u64,
        });
        out
    }
}
