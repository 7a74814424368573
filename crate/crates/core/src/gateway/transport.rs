use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

/// Which pipeline step a request belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Fix synthesis by the tutor model.
    Repair,
    /// Explanation and hint from the tutor model.
    Generation,
    /// Student repairs with the feedback in the prompt.
    ValidationAugmented,
    /// Student repairs from the plain repair prompt.
    ValidationStandard,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Repair => "repair",
            Stage::Generation => "generation",
            Stage::ValidationAugmented => "validation_augmented",
            Stage::ValidationStandard => "validation_standard",
        }
    }
}

/// Where a request comes from. Not part of the request digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RequestTag {
    pub program_id: String,
    pub trial: u32,
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub seed: u64,
    /// Total completions in the sample set.
    pub count: u32,
    /// Slots still needed; transports return one completion per slot.
    pub indices: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCompletion {
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct TransportError {
    pub retryable: bool,
    pub message: String,
}

impl TransportError {
    pub fn retryable(message: impl Into<String>) -> Self {
        Self {
            retryable: true,
            message: message.into(),
        }
    }

    pub fn fatal(message: impl Into<String>) -> Self {
        Self {
            retryable: false,
            message: message.into(),
        }
    }
}

/// Something that can produce completions for a prompt.
pub trait Transport: Send + Sync {
    fn complete(
        &self,
        request: &ChatRequest,
        tag: &RequestTag,
    ) -> Result<Vec<RawCompletion>, TransportError>;
}

/// Chat-completion endpoint speaking the `model`/`messages`/`temperature`/`n`
/// JSON schema with bearer authentication.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, token: Option<String>) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(180))
            .build()
            .map_err(|e| TransportError::fatal(format!("http client: {e}")))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            token,
        })
    }

    pub fn request_body(request: &ChatRequest) -> serde_json::Value {
        json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": request.indices.len(),
            "seed": request.seed,
        })
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: u32,
    message: Message,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

pub fn parse_chat_response(body: &str) -> Result<Vec<RawCompletion>, TransportError> {
    let mut parsed: ChatResponse = serde_json::from_str(body)
        .map_err(|e| TransportError::fatal(format!("malformed chat response: {e}")))?;
    parsed.choices.sort_by_key(|c| c.index);
    Ok(parsed
        .choices
        .into_iter()
        .map(|c| RawCompletion {
            text: c.message.content.unwrap_or_default(),
            truncated: c.finish_reason.as_deref() == Some("length"),
        })
        .collect())
}

impl Transport for HttpTransport {
    fn complete(
        &self,
        request: &ChatRequest,
        _tag: &RequestTag,
    ) -> Result<Vec<RawCompletion>, TransportError> {
        let mut builder = self
            .client
            .post(&self.endpoint)
            .json(&Self::request_body(request));
        if let Some(token) = &self.token {
            builder = builder.bearer_auth(token);
        }
        let response = builder
            .send()
            .map_err(|e| TransportError::retryable(format!("request failed: {e}")))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| TransportError::retryable(format!("reading response: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(TransportError::retryable(format!("{status}: {body}")));
        }
        if !status.is_success() {
            return Err(TransportError::fatal(format!("{status}: {body}")));
        }
        parse_chat_response(&body)
    }
}
