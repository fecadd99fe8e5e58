//! Chat-completion transport for the external-judge selection strategy.
//!
//! Speaks the OpenAI-compatible chat JSON (`{model, messages, temperature}`)
//! so any compatible server works. Retries transient failures (429/5xx,
//! timeouts) with exponential backoff and jitter; admission goes through a
//! token-bucket rate limiter. The API key travels only in the auth header.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable holding the judge API key.
pub const API_KEY_ENV: &str = "PICONER_JUDGE_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JudgeConfig {
    pub endpoint: String,
    pub model: String,
    /// Read from [`API_KEY_ENV`] when absent.
    #[serde(skip)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Always sent; defaults to 0 for deterministic judging.
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_requests_per_second")]
    pub requests_per_second: f64,
    /// Backoff base; retries wait `base * 2^attempt` plus jitter.
    #[serde(default = "default_backoff_ms")]
    pub backoff_base_ms: u64,
}

fn default_timeout_secs() -> u64 {
    30
}
fn default_max_retries() -> u32 {
    3
}
fn default_requests_per_second() -> f64 {
    5.0
}
fn default_backoff_ms() -> u64 {
    1000
}

impl JudgeConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        JudgeConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            temperature: 0.0,
            requests_per_second: default_requests_per_second(),
            backoff_base_ms: default_backoff_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.endpoint.is_empty() {
            return Err(Error::Config("judge endpoint is empty".into()));
        }
        if self.requests_per_second <= 0.0 {
            return Err(Error::Config("requests_per_second must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Wire request body. The key is never part of this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatChoice {
    message: ChatMessageOut,
}

#[derive(Debug, Clone, Deserialize)]
struct ChatMessageOut {
    content: String,
}

/// Raw HTTP-level reply.
#[derive(Debug, Clone)]
pub struct TransportReply {
    pub status: u16,
    pub body: String,
}

/// Sends one chat request and returns the raw reply. Implementations decide
/// where the auth header comes from; the body never carries the key.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<TransportReply>;
}

/// Blocking HTTP transport.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(config: &JudgeConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(HttpTransport {
            endpoint: config.endpoint.clone(),
            api_key: config.api_key.clone(),
            client,
        })
    }
}

impl Transport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<TransportReply> {
        let mut builder = self.client.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| Error::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| Error::Transport(e.to_string()))?;
        Ok(TransportReply { status, body })
    }
}

/// One scripted mock reply.
#[derive(Debug, Clone)]
pub struct ScriptedReply {
    pub status: u16,
    pub body: String,
}

impl ScriptedReply {
    /// A 200 reply whose completion text is `content`.
    pub fn ok(content: &str) -> Self {
        let body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": content}}]
        });
        ScriptedReply {
            status: 200,
            body: body.to_string(),
        }
    }

    pub fn status(status: u16) -> Self {
        ScriptedReply {
            status,
            body: format!("{{\"error\":\"scripted {status}\"}}"),
        }
    }
}

/// Replays a fixed script in order and records every request for assertions.
#[derive(Default)]
pub struct MockTransport {
    script: Mutex<VecDeque<ScriptedReply>>,
    requests: Mutex<Vec<ChatRequest>>,
}

impl MockTransport {
    pub fn new(script: Vec<ScriptedReply>) -> Self {
        MockTransport {
            script: Mutex::new(script.into()),
            requests: Mutex::new(Vec::new()),
        }
    }

    /// All answers succeed with the given contents.
    pub fn answering(contents: &[&str]) -> Self {
        Self::new(contents.iter().map(|c| ScriptedReply::ok(c)).collect())
    }

    pub fn recorded_requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().expect("mock lock").clone()
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().expect("mock lock").len()
    }
}

impl Transport for MockTransport {
    fn send(&self, request: &ChatRequest) -> Result<TransportReply> {
        self.requests.lock().expect("mock lock").push(request.clone());
        let reply = self
            .script
            .lock()
            .expect("mock lock")
            .pop_front()
            .ok_or_else(|| Error::Transport("mock script exhausted".into()))?;
        Ok(TransportReply {
            status: reply.status,
            body: reply.body,
        })
    }
}

struct TokenBucket {
    capacity: f64,
    tokens: f64,
    refill_per_sec: f64,
    last: Instant,
}

impl TokenBucket {
    fn new(rate: f64) -> Self {
        TokenBucket {
            capacity: rate.max(1.0),
            tokens: rate.max(1.0),
            refill_per_sec: rate,
            last: Instant::now(),
        }
    }

    fn acquire(&mut self) {
        loop {
            let now = Instant::now();
            self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.refill_per_sec)
                .min(self.capacity);
            self.last = now;
            if self.tokens >= 1.0 {
                self.tokens -= 1.0;
                return;
            }
            let wait = (1.0 - self.tokens) / self.refill_per_sec;
            std::thread::sleep(Duration::from_secs_f64(wait.min(0.25)));
        }
    }
}

/// The judge client: rate-limited, retrying chat completion.
pub struct JudgeClient {
    config: JudgeConfig,
    transport: Box<dyn Transport>,
    bucket: Mutex<TokenBucket>,
}

fn is_transient(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl JudgeClient {
    pub fn new(config: JudgeConfig, transport: Box<dyn Transport>) -> Result<Self> {
        config.validate()?;
        let bucket = Mutex::new(TokenBucket::new(config.requests_per_second));
        Ok(JudgeClient {
            config,
            transport,
            bucket,
        })
    }

    pub fn over_http(config: JudgeConfig) -> Result<Self> {
        let transport = HttpTransport::new(&config)?;
        Self::new(config, Box::new(transport))
    }

    pub fn config(&self) -> &JudgeConfig {
        &self.config
    }

    /// One completion round-trip: returns the first message text. Transient
    /// failures retry up to `max_retries` times with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
            temperature: self.config.temperature,
        };

        let mut last_error: Option<Error> = None;
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                self.backoff(attempt);
            }
            self.bucket.lock().expect("bucket lock").acquire();
            match self.transport.send(&request) {
                Err(e) => last_error = Some(e),
                Ok(reply) if is_transient(reply.status) => {
                    last_error = Some(Error::Transport(format!(
                        "transient status {}",
                        reply.status
                    )));
                }
                Ok(reply) if !(200..300).contains(&reply.status) => {
                    let mut body = reply.body;
                    body.truncate(200);
                    return Err(Error::Protocol {
                        status: reply.status,
                        body,
                    });
                }
                Ok(reply) => {
                    let parsed: ChatResponse =
                        serde_json::from_str(&reply.body).map_err(|e| {
                            Error::Transport(format!("malformed completion body: {e}"))
                        })?;
                    let first = parsed
                        .choices
                        .into_iter()
                        .next()
                        .ok_or_else(|| Error::Transport("completion has no choices".into()))?;
                    return Ok(first.message.content);
                }
            }
        }
        Err(last_error.unwrap_or_else(|| Error::Transport("retries exhausted".into())))
    }

    fn backoff(&self, attempt: u32) {
        if self.config.backoff_base_ms == 0 {
            return;
        }
        let base = self.config.backoff_base_ms as f64 * 2f64.powi(attempt as i32 - 1);
        // jitter in [0, 25%) keyed off the clock; retries need no determinism
        let jitter = (Instant::now().elapsed().subsec_nanos() % 1000) as f64 / 4000.0;
        std::thread::sleep(Duration::from_millis((base * (1.0 + jitter)) as u64));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_config() -> JudgeConfig {
        JudgeConfig {
            endpoint: "http://judge.test/v1/chat/completions".into(),
            model: "judge-model".into(),
            api_key: Some("secret-key".into()),
            timeout_secs: 1,
            max_retries: 3,
            temperature: 0.0,
            requests_per_second: 10_000.0,
            backoff_base_ms: 0,
        }
    }

    fn client_with(script: Vec<ScriptedReply>) -> (JudgeClient, &'static MockTransport) {
        let mock: &'static MockTransport = Box::leak(Box::new(MockTransport::new(script)));
        let client = JudgeClient::new(test_config(), Box::new(StaticRef(mock))).unwrap();
        (client, mock)
    }

    struct StaticRef(&'static MockTransport);
    impl Transport for StaticRef {
        fn send(&self, request: &ChatRequest) -> Result<TransportReply> {
            self.0.send(request)
        }
    }

    #[test]
    fn scripted_yes_round_trips() {
        let (client, mock) = client_with(vec![ScriptedReply::ok("Yes")]);
        assert_eq!(client.complete("prompt").unwrap(), "Yes");
        assert_eq!(mock.request_count(), 1);
    }

    #[test]
    fn retries_on_429_then_succeeds() {
        let (client, mock) = client_with(vec![
            ScriptedReply::status(429),
            ScriptedReply::status(429),
            ScriptedReply::ok("Yes"),
        ]);
        assert_eq!(client.complete("prompt").unwrap(), "Yes");
        assert_eq!(mock.request_count(), 3);
    }

    #[test]
    fn zero_retries_scripted_500_is_transport_error() {
        let mut config = test_config();
        config.max_retries = 0;
        let mock: &'static MockTransport =
            Box::leak(Box::new(MockTransport::new(vec![ScriptedReply::status(500)])));
        let client = JudgeClient::new(config, Box::new(StaticRef(mock))).unwrap();
        match client.complete("prompt") {
            Err(Error::Transport(_)) => {}
            other => panic!("expected transport error, got {other:?}"),
        }
        assert_eq!(mock.request_count(), 1);
    }

    #[test]
    fn request_count_bounded_by_one_plus_max_retries() {
        let (client, mock) = client_with(vec![
            ScriptedReply::status(503),
            ScriptedReply::status(503),
            ScriptedReply::status(503),
            ScriptedReply::status(503),
            ScriptedReply::ok("never reached"),
        ]);
        assert!(client.complete("prompt").is_err());
        assert_eq!(mock.request_count(), 1 + 3);
    }

    #[test]
    fn non_transient_status_is_protocol_error_without_retry() {
        let (client, mock) = client_with(vec![ScriptedReply::status(401)]);
        match client.complete("prompt") {
            Err(Error::Protocol { status: 401, .. }) => {}
            other => panic!("expected protocol error, got {other:?}"),
        }
        assert_eq!(mock.request_count(), 1);
    }

    #[test]
    fn body_never_contains_api_key_and_temperature_is_sent() {
        let (client, mock) = client_with(vec![ScriptedReply::ok("No")]);
        client.complete("check this").unwrap();
        let requests = mock.recorded_requests();
        let body = serde_json::to_string(&requests[0]).unwrap();
        assert!(!body.contains("secret-key"));
        assert!(body.contains("\"temperature\":0.0"));
        assert_eq!(requests[0].messages.len(), 1, "single user message");
        assert_eq!(requests[0].messages[0].role, "user");
    }

    #[test]
    fn exhausted_script_is_an_error() {
        let (client, _mock) = client_with(vec![]);
        assert!(client.complete("prompt").is_err());
    }
}
