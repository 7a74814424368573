//! Prompt rendering, model sampling and completion parsing.

mod cache;
mod client;
mod parse;
mod script;
mod templates;
mod transport;

pub use cache::{text_digest, CachedCompletion, DigestInput, ReplayCache};
pub use client::{CallRecord, ClientStats, GatewayError, ModelClient, RetryPolicy};
pub use parse::{extract_program, parse_feedback, parse_program, ParseFailure};
pub use script::{ScriptError, SessionScript};
pub use templates::{
    render_generation_prompt, render_repair_prompt, render_validation_prompt, RenderError,
    BAD_EXPLANATION_SENTINEL, GENERATION_TEMPLATE, REPAIR_TEMPLATE, VALIDATION_TEMPLATE,
};
pub use transport::{
    parse_chat_response, ChatRequest, HttpTransport, RawCompletion, RequestTag, Stage, Transport,
    TransportError,
};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    ScriptedReplay,
}

/// Where completions come from.
///
/// For `scripted_replay` the path is a replay-cache directory; for
/// `http_chat` it is the endpoint URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub kind: BackendKind,
    pub endpoint_or_path: String,
    pub model_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env_var: Option<String>,
}

impl BackendSpec {
    pub fn replay(model: impl Into<String>, path: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::ScriptedReplay,
            endpoint_or_path: path.into(),
            model_name: model.into(),
            auth_env_var: None,
        }
    }

    pub fn http(
        model: impl Into<String>,
        url: impl Into<String>,
        auth_env_var: Option<String>,
    ) -> Self {
        Self {
            kind: BackendKind::HttpChat,
            endpoint_or_path: url.into(),
            model_name: model.into(),
            auth_env_var,
        }
    }

    /// Parses `replay:<model>@<dir>` or `http:<model>@<url>[#ENV_VAR]`.
    pub fn parse_cli(text: &str) -> Result<Self, String> {
        let (kind, rest) = text.split_once(':').ok_or_else(|| {
            format!("expected replay:<model>@<dir> or http:<model>@<url>, got {text:?}")
        })?;
        let (model, target) = rest
            .split_once('@')
            .ok_or_else(|| format!("missing '@' in backend {text:?}"))?;
        if model.is_empty() || target.is_empty() {
            return Err(format!("empty model or location in backend {text:?}"));
        }
        match kind {
            "replay" => Ok(Self::replay(model, target)),
            "http" => {
                let (url, env) = match target.rsplit_once('#') {
                    Some((url, env)) if !env.is_empty() => (url, Some(env.to_string())),
                    _ => (target, None),
                };
                Ok(Self::http(model, url, env))
            }
            other => Err(format!("unknown backend kind {other:?}")),
        }
    }

    pub fn to_cli(&self) -> String {
        match self.kind {
            BackendKind::ScriptedReplay => {
                format!("replay:{}@{}", self.model_name, self.endpoint_or_path)
            }
            BackendKind::HttpChat => match &self.auth_env_var {
                Some(env) => format!("http:{}@{}#{env}", self.model_name, self.endpoint_or_path),
                None => format!("http:{}@{}", self.model_name, self.endpoint_or_path),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub temperature: f64,
    pub count: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishState {
    Complete,
    Truncated,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub index: u32,
    pub finish_state: FinishState,
}
