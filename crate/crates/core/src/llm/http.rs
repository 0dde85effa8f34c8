use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatClient, ChatMessage, LlmError};

pub const ENV_ENDPOINT: &str = "OVIGO_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "OVIGO_LLM_API_KEY";
pub const ENV_MODEL: &str = "OVIGO_LLM_MODEL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Full chat-completions URL. Falls back to `OVIGO_LLM_ENDPOINT`.
    pub endpoint: Option<String>,
    /// Falls back to `OVIGO_LLM_MODEL`.
    pub model: Option<String>,
    pub temperature: f64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_s: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: None,
            model: None,
            temperature: 0.0,
            max_attempts: 3,
            backoff_ms: 500,
            timeout_s: 120,
        }
    }
}

/// OpenAI-compatible chat-completions client. The API key is read from
/// `OVIGO_LLM_API_KEY` and never serialized.
pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    max_attempts: u32,
    backoff: Duration,
}

impl HttpChatClient {
    pub fn from_config(cfg: &HttpConfig) -> Result<Self, LlmError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .or_else(|| std::env::var(ENV_ENDPOINT).ok())
            .ok_or_else(|| LlmError::NotConfigured(format!("set {ENV_ENDPOINT} or llm.endpoint")))?;
        let model = cfg
            .model
            .clone()
            .or_else(|| std::env::var(ENV_MODEL).ok())
            .ok_or_else(|| LlmError::NotConfigured(format!("set {ENV_MODEL} or llm.model")))?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_s)))
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint,
            model,
            api_key: std::env::var(ENV_API_KEY).ok(),
            temperature: cfg.temperature,
            max_attempts: cfg.max_attempts.max(1),
            backoff: Duration::from_millis(cfg.backoff_ms),
        })
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        })
    }

    fn attempt(&self, body: &Value) -> Result<String, LlmError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::StatusCode(status) => LlmError::Status { status },
            other => LlmError::Transport(other.to_string()),
        })?;
        let v: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::BadResponse(e.to_string()))?;
        extract_content(&v)
    }
}

pub(crate) fn extract_content(v: &Value) -> Result<String, LlmError> {
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| LlmError::BadResponse("missing choices[0].message.content".into()))
}

impl ChatClient for HttpChatClient {
    fn send(&self, messages: &[ChatMessage]) -> Result<String, LlmError> {
        let body = self.request_body(messages);
        let mut delay = self.backoff;
        let mut attempt = 1;
        loop {
            match self.attempt(&body) {
                Err(LlmError::Transport(msg)) if attempt < self.max_attempts => {
                    log::warn!("LLM transport error (attempt {attempt}): {msg}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_completion_payload() {
        let v = json!({"choices":[{"message":{"role":"assistant","content":"bedroom"}}]});
        assert_eq!(extract_content(&v).unwrap(), "bedroom");
        assert!(extract_content(&json!({"choices":[]})).is_err());
    }

    #[test]
    fn body_carries_model_temperature_and_messages() {
        let cfg = HttpConfig {
            endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()),
            model: Some("m".into()),
            ..Default::default()
        };
        let client = HttpChatClient::from_config(&cfg).unwrap();
        let body = client.request_body(&[ChatMessage::user("q")]);
        assert_eq!(
            body,
            json!({"model":"m","temperature":0.0,"messages":[{"role":"user","content":"q"}]})
        );
    }

    #[test]
    fn transport_errors_are_retried_then_surface() {
        let cfg = HttpConfig {
            endpoint: Some("http://127.0.0.1:9/v1/chat/completions".into()),
            model: Some("m".into()),
            backoff_ms: 1,
            timeout_s: 2,
            ..Default::default()
        };
        let client = HttpChatClient::from_config(&cfg).unwrap();
        let err = client.send(&[ChatMessage::user("q")]).unwrap_err();
        assert!(matches!(err, LlmError::Transport(_)), "{err:?}");
    }
}
