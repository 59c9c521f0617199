//! Chat-completion client: one trait, three backends (HTTP, scripted mock,
//! cache), with retry, cost accounting, a concurrency cap, and an optional
//! raw exchange log.

mod http;
mod mock;
mod pricing;

pub use http::HttpBackend;
pub use mock::{MockBackend, MockRule, ScriptKey};
pub use pricing::{cost, reasoning_cost, ModelSpec, PricingTable, TokenUsage, DEFAULT_PRICING};

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: &str) -> ChatMessage {
        ChatMessage {
            role: "user".into(),
            content: content.to_string(),
        }
    }

    pub fn system(content: &str) -> ChatMessage {
        ChatMessage {
            role: "system".into(),
            content: content.to_string(),
        }
    }
}

/// Sampling knobs. Everything is optional and unset fields never reach the
/// wire, because some models reject any sampling parameter at all.
#[derive(Clone, PartialEq, Default, Debug, Serialize, Deserialize)]
pub struct ChatParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(default)]
    pub params: ChatParams,
}

impl ChatRequest {
    pub fn new(model: &str, messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: model.to_string(),
            messages,
            params: ChatParams::default(),
        }
    }

    /// Stable content hash used for caching and transcript correlation.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("requests serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Mock,
    Cache,
}

/// A completed call: what was sent, what came back, what it cost to learn.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ChatExchange {
    pub request: ChatRequest,
    pub response_text: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
    pub backend: BackendKind,
    pub retries: u32,
}

#[derive(Error, Debug)]
pub enum GatewayError {
    #[error("unknown model alias {0}")]
    UnknownModel(String),
    #[error("pricing table: {0}")]
    BadPricing(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("mock script: {0}")]
    Script(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Backend-level failure, split by whether another attempt could help.
#[derive(Debug)]
pub enum BackendError {
    Auth(String),
    RateLimited(String),
    Server(String),
    Transport(String),
    Malformed(String),
    Script(String),
}

impl BackendError {
    fn retryable(&self) -> bool {
        matches!(
            self,
            BackendError::RateLimited(_) | BackendError::Server(_) | BackendError::Transport(_)
        )
    }

    fn message(&self) -> &str {
        match self {
            BackendError::Auth(m)
            | BackendError::RateLimited(m)
            | BackendError::Server(m)
            | BackendError::Transport(m)
            | BackendError::Malformed(m)
            | BackendError::Script(m) => m,
        }
    }

    fn into_gateway(self) -> GatewayError {
        match self {
            BackendError::Auth(m) => GatewayError::Auth(m),
            BackendError::Malformed(m) => GatewayError::Malformed(m),
            BackendError::Script(m) => GatewayError::Script(m),
            BackendError::RateLimited(m) | BackendError::Server(m) | BackendError::Transport(m) => {
                GatewayError::RetriesExhausted {
                    attempts: 1,
                    last: m,
                }
            }
        }
    }
}

pub struct BackendReply {
    pub text: String,
    pub usage: TokenUsage,
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest, spec: &ModelSpec) -> Result<BackendReply, BackendError>;
    fn kind(&self) -> BackendKind;
}

#[derive(Clone, Debug)]
pub struct GatewayConfig {
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub concurrency: usize,
    pub cache: bool,
}

impl Default for GatewayConfig {
    fn default() -> GatewayConfig {
        GatewayConfig {
            max_attempts: 3,
            backoff_base: Duration::from_millis(250),
            concurrency: 4,
            cache: true,
        }
    }
}

/// Counting semaphore; `rayon` has no async story to borrow here and the
/// standard library has no semaphore, so this is the classic two-liner.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(permits: usize) -> Gate {
        Gate {
            free: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.free.lock().unwrap() += 1;
        self.gate.cv.notify_one();
    }
}

#[derive(Serialize)]
struct RawLogLine<'a> {
    key: &'a str,
    attempt: u32,
    outcome: &'a str,
    model: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    response_text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
}

/// Shared client. All mutability is interior, so one gateway can serve any
/// number of worker threads, bounded by the configured concurrency cap.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    pricing: PricingTable,
    config: GatewayConfig,
    cache: Mutex<HashMap<String, String>>,
    gate: Gate,
    raw_log: Option<Mutex<File>>,
}

impl Gateway {
    pub fn new(
        backend: Box<dyn ChatBackend>,
        pricing: PricingTable,
        config: GatewayConfig,
    ) -> Gateway {
        let gate = Gate::new(config.concurrency);
        Gateway {
            backend,
            pricing,
            config,
            cache: Mutex::new(HashMap::new()),
            gate,
            raw_log: None,
        }
    }

    /// Scripted backend with caching on: the default for tests and replays.
    pub fn mock(backend: MockBackend) -> Gateway {
        Gateway::new(Box::new(backend), PricingTable::builtin(), GatewayConfig::default())
    }

    /// Appends every attempt (successes and failures) to a JSONL file.
    pub fn with_raw_log(mut self, path: &Path) -> Result<Gateway, GatewayError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.raw_log = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn pricing(&self) -> &PricingTable {
        &self.pricing
    }

    pub fn model_spec(&self, alias: &str) -> Result<&ModelSpec, GatewayError> {
        self.pricing.get(alias)
    }

    /// Price of an exchange under this gateway's pricing table.
    pub fn exchange_cost(&self, exchange: &ChatExchange) -> Result<f64, GatewayError> {
        Ok(cost(&exchange.usage, self.pricing.get(&exchange.request.model)?))
    }

    fn log_raw(&self, line: &RawLogLine<'_>) {
        if let Some(file) = &self.raw_log {
            let mut file = file.lock().unwrap();
            let json = serde_json::to_string(line).expect("log lines serialize");
            let _ = writeln!(file, "{json}");
        }
    }

    /// Sends one request, honoring the cache, the concurrency cap, and the
    /// retry budget. Retryable failures back off exponentially; terminal
    /// failures and exhaustion surface as distinct error classes.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatExchange, GatewayError> {
        let spec = self.pricing.get(&request.model)?.clone();
        let key = request.content_hash();

        if self.config.cache {
            if let Some(text) = self.cache.lock().unwrap().get(&key).cloned() {
                return Ok(ChatExchange {
                    request: request.clone(),
                    response_text: text,
                    usage: TokenUsage::ZERO,
                    latency_ms: 0,
                    backend: BackendKind::Cache,
                    retries: 0,
                });
            }
        }

        let _permit = self.gate.acquire();
        let started = Instant::now();
        let mut last_error = String::new();
        for attempt in 1..=self.config.max_attempts.max(1) {
            match self.backend.complete(request, &spec) {
                Ok(reply) => {
                    self.log_raw(&RawLogLine {
                        key: &key,
                        attempt,
                        outcome: "ok",
                        model: &request.model,
                        response_text: Some(&reply.text),
                        error: None,
                    });
                    if self.config.cache {
                        self.cache
                            .lock()
                            .unwrap()
                            .insert(key, reply.text.clone());
                    }
                    let latency_ms = match self.backend.kind() {
                        BackendKind::Mock => 0,
                        _ => started.elapsed().as_millis() as u64,
                    };
                    return Ok(ChatExchange {
                        request: request.clone(),
                        response_text: reply.text,
                        usage: reply.usage,
                        latency_ms,
                        backend: self.backend.kind(),
                        retries: attempt - 1,
                    });
                }
                Err(err) => {
                    self.log_raw(&RawLogLine {
                        key: &key,
                        attempt,
                        outcome: "error",
                        model: &request.model,
                        response_text: None,
                        error: Some(err.message()),
                    });
                    if !err.retryable() {
                        return Err(err.into_gateway());
                    }
                    last_error = err.message().to_string();
                    if attempt < self.config.max_attempts {
                        let backoff = self.config.backoff_base * 2u32.pow(attempt - 1);
                        std::thread::sleep(backoff);
                    }
                }
            }
        }
        Err(GatewayError::RetriesExhausted {
            attempts: self.config.max_attempts,
            last: last_error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn scripted(rules: Vec<MockRule>) -> Gateway {
        Gateway::mock(MockBackend::new(rules))
    }

    fn request(text: &str) -> ChatRequest {
        ChatRequest::new("4o-mini", vec![ChatMessage::user(text)])
    }

    #[test]
    fn scripted_responses_come_back_with_synthetic_usage() {
        let gw = scripted(vec![MockRule::new(
            ScriptKey::UserContains("ping".into()),
            vec!["pong".into()],
        )]);
        let ex = gw.complete(&request("ping")).unwrap();
        assert_eq!(ex.response_text, "pong");
        assert_eq!(ex.backend, BackendKind::Mock);
        assert!(ex.usage.prompt_tokens > 0);
        assert!(ex.usage.completion_tokens > 0);
        assert_eq!(ex.latency_ms, 0);
    }

    #[test]
    fn identical_requests_hit_the_cache_at_zero_cost() {
        let gw = scripted(vec![MockRule::new(ScriptKey::Any, vec!["hi".into()])]);
        let first = gw.complete(&request("q")).unwrap();
        let second = gw.complete(&request("q")).unwrap();
        assert_eq!(first.backend, BackendKind::Mock);
        assert_eq!(second.backend, BackendKind::Cache);
        assert_eq!(second.response_text, first.response_text);
        assert_eq!(second.usage, TokenUsage::ZERO);
        assert_eq!(gw.exchange_cost(&second).unwrap(), 0.0);
    }

    #[test]
    fn different_params_are_different_cache_keys() {
        let gw = scripted(vec![MockRule::new(ScriptKey::Any, vec!["a".into(), "b".into()])]);
        let mut second = request("q");
        second.params.seed = Some(7);
        let x = gw.complete(&request("q")).unwrap();
        let y = gw.complete(&second).unwrap();
        assert_eq!(x.backend, BackendKind::Mock);
        assert_eq!(y.backend, BackendKind::Mock);
        assert_eq!((x.response_text.as_str(), y.response_text.as_str()), ("a", "b"));
    }

    #[test]
    fn unknown_model_is_rejected_before_any_call() {
        let gw = scripted(vec![MockRule::new(ScriptKey::Any, vec!["x".into()])]);
        let req = ChatRequest::new("nope", vec![ChatMessage::user("q")]);
        assert!(matches!(gw.complete(&req), Err(GatewayError::UnknownModel(_))));
    }

    #[test]
    fn unscripted_prompts_error_rather_than_guess() {
        let gw = scripted(vec![MockRule::new(
            ScriptKey::UserContains("only-this".into()),
            vec!["x".into()],
        )]);
        assert!(matches!(
            gw.complete(&request("something else")),
            Err(GatewayError::Script(_))
        ));
    }

    #[test]
    fn usage_synthesis_is_deterministic() {
        let make = || scripted(vec![MockRule::new(ScriptKey::Any, vec!["same".into()])]);
        let a = make().complete(&request("q")).unwrap();
        let b = make().complete(&request("q")).unwrap();
        assert_eq!(a.usage, b.usage);
    }

    #[test]
    fn concurrency_cap_is_respected() {
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let backend = MockBackend::new(vec![MockRule::new(ScriptKey::Any, vec!["r".into()])])
            .with_delay(Duration::from_millis(15))
            .with_probe({
                let in_flight = in_flight.clone();
                let peak = peak.clone();
                move || {
                    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                }
            })
            .with_exit_probe({
                let in_flight = in_flight.clone();
                move || {
                    in_flight.fetch_sub(1, Ordering::SeqCst);
                }
            });
        let mut config = GatewayConfig::default();
        config.concurrency = 2;
        config.cache = false;
        let gw = Arc::new(Gateway::new(Box::new(backend), PricingTable::builtin(), config));
        let mut handles = Vec::new();
        for i in 0..8 {
            let gw = gw.clone();
            handles.push(std::thread::spawn(move || {
                gw.complete(&request(&format!("q{i}"))).unwrap();
            }));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert!(peak.load(Ordering::SeqCst) <= 2, "peak {}", peak.load(Ordering::SeqCst));
    }

    #[test]
    fn raw_log_records_every_attempt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("raw.jsonl");
        let gw = scripted(vec![MockRule::new(ScriptKey::Any, vec!["ok".into()])])
            .with_raw_log(&path)
            .unwrap();
        gw.complete(&request("q")).unwrap();
        gw.complete(&request("q")).unwrap(); // cache hit: no new line
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1);
        let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(v["outcome"], "ok");
        assert_eq!(v["attempt"], 1);
    }
}
