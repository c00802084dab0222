use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Backend, ChatMessage, OracleError, OracleGame, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Full URL of the chat-completions endpoint. Falls back to the
    /// `BIDDER_CHAT_URL` environment variable when empty.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: String,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: String::new(),
            model: String::new(),
            temperature: 0.0,
            timeout_secs: 60.0,
            max_attempts: 5,
            backoff_ms: 500,
            max_backoff_ms: 30_000,
            max_in_flight: 4,
            api_key_env: "BIDDER_API_KEY".into(),
        }
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate lock");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate lock");
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("gate lock") -= 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Retry(String),
    Fatal(OracleError),
}

/// Chat-completion client with bounded concurrency and exponential backoff.
pub struct HttpBackend {
    cfg: HttpConfig,
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, OracleError> {
        let endpoint = if cfg.endpoint.is_empty() {
            std::env::var("BIDDER_CHAT_URL").unwrap_or_default()
        } else {
            cfg.endpoint.clone()
        };
        if endpoint.is_empty() {
            return Err(OracleError::Config("no chat endpoint configured (set endpoint or BIDDER_CHAT_URL)".into()));
        }
        if cfg.model.is_empty() {
            return Err(OracleError::Config("no model name configured".into()));
        }
        if cfg.max_attempts == 0 || cfg.max_in_flight == 0 || cfg.timeout_secs <= 0.0 {
            return Err(OracleError::Config("max_attempts, max_in_flight and timeout_secs must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| OracleError::Config(format!("http client: {e}")))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        let gate = Gate { in_flight: Mutex::new(0), freed: Condvar::new(), limit: cfg.max_in_flight };
        Ok(HttpBackend { cfg, endpoint, api_key, client, gate })
    }

    /// Sends one conversation and returns the assistant's text.
    pub fn chat(&self, messages: &[ChatMessage]) -> Result<String, OracleError> {
        let body = json!({ "model": self.cfg.model, "messages": messages, "temperature": self.cfg.temperature });
        let mut last = String::new();
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                let delay = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(20)).min(self.cfg.max_backoff_ms);
                std::thread::sleep(Duration::from_millis(delay));
            }
            let _slot = self.gate.enter();
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => last = msg,
            }
        }
        Err(OracleError::Transport(format!("gave up after {} attempts: {last}", self.cfg.max_attempts)))
    }

    fn send(&self, body: &Value) -> Result<String, Failure> {
        let mut req =
            self.client.post(&self.endpoint).header("content-type", "application/json").body(body.to_string());
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retry(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Failure::Retry(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(OracleError::Transport(format!("status {status}: {text}"))));
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(OracleError::Parse(format!("response is not JSON: {e}"))))?;
        assistant_text(&value)
            .ok_or_else(|| Failure::Fatal(OracleError::Parse("response has no assistant message".into())))
    }
}

/// Content of the first assistant message of a chat-completion response.
fn assistant_text(v: &Value) -> Option<String> {
    let message = v.pointer("/choices/0/message").or_else(|| v.get("message"))?;
    message.get("content")?.as_str().map(str::to_string)
}

impl<G: OracleGame> Backend<G> for HttpBackend {
    fn complete(&self, query: &Query<G>) -> Result<String, OracleError> {
        self.chat(&query.messages)
    }
}
