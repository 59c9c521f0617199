//! Deterministic scripted backend for tests and offline replays.

use std::sync::Mutex;
use std::time::Duration;

use sha2::{Digest, Sha256};

use super::{BackendError, BackendKind, BackendReply, ChatBackend, ChatRequest, ModelSpec, TokenUsage};

/// How a rule decides whether it answers a request.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ScriptKey {
    /// Matches when the last user message contains this needle.
    UserContains(String),
    /// Matches everything; put it last as a fallback.
    Any,
}

impl ScriptKey {
    fn matches(&self, request: &ChatRequest) -> bool {
        match self {
            ScriptKey::Any => true,
            ScriptKey::UserContains(needle) => request
                .messages
                .iter()
                .rev()
                .find(|m| m.role == "user")
                .is_some_and(|m| m.content.contains(needle)),
        }
    }
}

/// One scripted behavior: the nth matching call gets `responses[n]`, and
/// calls beyond the script's end keep getting the final entry.
#[derive(Clone, Debug)]
pub struct MockRule {
    pub key: ScriptKey,
    pub responses: Vec<String>,
}

impl MockRule {
    pub fn new(key: ScriptKey, responses: Vec<String>) -> MockRule {
        MockRule { key, responses }
    }
}

type Probe = Box<dyn Fn() + Send + Sync>;

pub struct MockBackend {
    rules: Vec<MockRule>,
    counters: Mutex<Vec<usize>>,
    delay: Duration,
    on_enter: Option<Probe>,
    on_exit: Option<Probe>,
}

impl MockBackend {
    pub fn new(rules: Vec<MockRule>) -> MockBackend {
        let counters = Mutex::new(vec![0; rules.len()]);
        MockBackend {
            rules,
            counters,
            delay: Duration::ZERO,
            on_enter: None,
            on_exit: None,
        }
    }

    /// Artificial per-call latency, for concurrency tests.
    pub fn with_delay(mut self, delay: Duration) -> MockBackend {
        self.delay = delay;
        self
    }

    pub fn with_probe(mut self, probe: impl Fn() + Send + Sync + 'static) -> MockBackend {
        self.on_enter = Some(Box::new(probe));
        self
    }

    pub fn with_exit_probe(mut self, probe: impl Fn() + Send + Sync + 'static) -> MockBackend {
        self.on_exit = Some(Box::new(probe));
        self
    }

    /// Token counts a real endpoint would have billed, synthesized from the
    /// content so they are stable across runs: sizes scale with text length
    /// and a hash supplies a plausible reasoning count.
    fn synthesize_usage(request: &ChatRequest, response: &str) -> TokenUsage {
        let prompt_bytes: usize = request.messages.iter().map(|m| m.content.len()).sum();
        let digest = Sha256::digest(
            [request.content_hash().as_bytes(), response.as_bytes()]
                .concat(),
        );
        let h = u64::from(digest[0]) << 8 | u64::from(digest[1]);
        TokenUsage {
            prompt_tokens: (prompt_bytes as u64) / 4 + 1,
            completion_tokens: (response.len() as u64) / 4 + 1,
            reasoning_tokens: h % 3000,
            reasoning_folded: false,
        }
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest, _spec: &ModelSpec) -> Result<BackendReply, BackendError> {
        if let Some(probe) = &self.on_enter {
            probe();
        }
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        let result = (|| {
            let slot = self.rules.iter().position(|r| r.key.matches(request));
            let Some(slot) = slot else {
                return Err(BackendError::Script(format!(
                    "no rule matches request {}",
                    request.content_hash()
                )));
            };
            let n = {
                let mut counters = self.counters.lock().unwrap();
                let n = counters[slot];
                counters[slot] += 1;
                n
            };
            let rule = &self.rules[slot];
            if rule.responses.is_empty() {
                return Err(BackendError::Script("rule has no responses".into()));
            }
            let text = rule.responses[n.min(rule.responses.len() - 1)].clone();
            let usage = MockBackend::synthesize_usage(request, &text);
            Ok(BackendReply { text, usage })
        })();
        if let Some(probe) = &self.on_exit {
            probe();
        }
        result
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Mock
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ChatMessage;

    fn req(text: &str) -> ChatRequest {
        ChatRequest::new("4o", vec![ChatMessage::user(text)])
    }

    fn reply(backend: &MockBackend, text: &str) -> String {
        let spec = ModelSpec {
            alias: "4o".into(),
            wire_name: "w".into(),
            input_per_million: 1.0,
            output_per_million: 1.0,
        };
        backend.complete(&req(text), &spec).unwrap().text
    }

    #[test]
    fn first_matching_rule_wins() {
        let backend = MockBackend::new(vec![
            MockRule::new(ScriptKey::UserContains("alpha".into()), vec!["A".into()]),
            MockRule::new(ScriptKey::Any, vec!["fallback".into()]),
        ]);
        assert_eq!(reply(&backend, "has alpha inside"), "A");
        assert_eq!(reply(&backend, "nothing"), "fallback");
    }

    #[test]
    fn scripts_advance_per_rule_then_repeat_the_tail() {
        let backend = MockBackend::new(vec![MockRule::new(
            ScriptKey::Any,
            vec!["first".into(), "second".into()],
        )]);
        assert_eq!(reply(&backend, "a"), "first");
        assert_eq!(reply(&backend, "b"), "second");
        assert_eq!(reply(&backend, "c"), "second");
    }

    #[test]
    fn usage_tracks_content_sizes() {
        let short = MockBackend::synthesize_usage(&req("hi"), "ok");
        let long = MockBackend::synthesize_usage(&req(&"x".repeat(400)), &"y".repeat(4000));
        assert!(long.prompt_tokens > short.prompt_tokens);
        assert!(long.completion_tokens > short.completion_tokens);
        assert!(!short.reasoning_folded);
        assert_eq!(short, MockBackend::synthesize_usage(&req("hi"), "ok"));
    }
}
