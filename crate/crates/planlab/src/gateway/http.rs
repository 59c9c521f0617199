//! OpenAI-compatible HTTP backend.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendKind, BackendReply, ChatBackend, ChatMessage, ChatParams, ChatRequest, ModelSpec, TokenUsage};

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    #[serde(flatten)]
    params: &'a ChatParams,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
    #[serde(default)]
    completion_tokens_details: Option<WireDetails>,
}

#[derive(Deserialize)]
struct WireDetails {
    #[serde(default)]
    reasoning_tokens: u64,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: Option<String>) -> HttpBackend {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(600))
            .build()
            .expect("client builds");
        HttpBackend {
            client,
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key,
        }
    }

    /// Reads the key from an environment variable, the usual deployment.
    pub fn from_env(base_url: &str, key_var: &str) -> Result<HttpBackend, BackendError> {
        match std::env::var(key_var) {
            Ok(key) if !key.is_empty() => Ok(HttpBackend::new(base_url, Some(key))),
            _ => Err(BackendError::Auth(format!("{key_var} is not set"))),
        }
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &ChatRequest, spec: &ModelSpec) -> Result<BackendReply, BackendError> {
        let url = format!("{}/chat/completions", self.base_url);
        let body = WireRequest {
            model: &spec.wire_name,
            messages: &request.messages,
            params: &request.params,
        };
        let mut call = self.client.post(&url).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;

        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(BackendError::Auth(format!("{status}: {text}")));
        }
        if status.as_u16() == 429 {
            return Err(BackendError::RateLimited(format!("{status}: {text}")));
        }
        if status.is_server_error() {
            return Err(BackendError::Server(format!("{status}: {text}")));
        }
        if !status.is_success() {
            return Err(BackendError::Malformed(format!("{status}: {text}")));
        }

        let wire: WireResponse = serde_json::from_str(&text)
            .map_err(|e| BackendError::Malformed(format!("{e}: {text}")))?;
        let content = wire
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| BackendError::Malformed("response has no message content".into()))?;
        // OpenAI folds reasoning tokens into completion_tokens and breaks
        // them out in the details block; keep the fold flag so cost math
        // does not bill them twice.
        let usage = wire.usage.map_or(TokenUsage::ZERO, |u| TokenUsage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
            reasoning_tokens: u.completion_tokens_details.map_or(0, |d| d.reasoning_tokens),
            reasoning_folded: true,
        });
        Ok(BackendReply {
            text: content,
            usage,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }
}
