use std::time::Duration;

use serde::{Deserialize, Serialize};
use schemars::JsonSchema;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Remote,
    Mock,
}

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
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
        }
    }
}

/// One call to a provider. `fixture_key` is the stable digest mock
/// providers look responses up by; `attempt` starts at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub fixture_key: String,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no fixture for request digest {0}")]
    MissingFixture(String),
    #[error("scripted provider has no responses left")]
    Exhausted,
}

pub trait Provider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Returns the raw text of the model's reply.
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

impl<P: Provider + ?Sized> Provider for Box<P> {
    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

impl<P: Provider + ?Sized> Provider for std::sync::Arc<P> {
    fn kind(&self) -> ProviderKind {
        (**self).kind()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(request)
    }
}

/// Client for an OpenAI-compatible chat-completions endpoint.
pub struct RemoteProvider {
    url: String,
    model: String,
    api_key: String,
    json_mode: bool,
    agent: ureq::Agent,
}

impl std::fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("json_mode", &self.json_mode)
            .finish_non_exhaustive()
    }
}

impl RemoteProvider {
    /// `endpoint` is either the API base (`https://host/v1`) or the full
    /// `.../chat/completions` URL.
    pub fn new(endpoint: &str, model: &str, api_key: String, timeout: Duration) -> Self {
        let endpoint = endpoint.trim_end_matches('/');
        let url = if endpoint.ends_with("/chat/completions") {
            endpoint.to_string()
        } else {
            format!("{endpoint}/chat/completions")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url,
            model: model.to_string(),
            api_key,
            json_mode: true,
            agent,
        }
    }

    /// Whether to request `response_format: json_object`; some compatible
    /// servers reject the parameter.
    pub fn json_mode(mut self, on: bool) -> Self {
        self.json_mode = on;
        self
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": 0,
        });
        if self.json_mode {
            body["response_format"] = json!({"type": "json_object"});
        }
        body
    }
}

impl Provider for RemoteProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        let mut response = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(self.body(request).to_string())
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::Auth(format!("HTTP {status}"))),
            _ => {
                let snippet: String = text.chars().take(200).collect();
                return Err(ProviderError::Transport(format!("HTTP {status}: {snippet}")));
            }
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("unreadable response body: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transport("response has no message content".to_string()))
    }
}
