//! OpenAI-style chat-completions client with retries.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::outcome::Task;

/// Output cap for both tasks. Labels fit well within it.
pub const MAX_OUTPUT_TOKENS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub concurrency: usize,
    /// Name of the environment variable holding the API key, if any.
    pub api_key_env: Option<String>,
}

impl Default for ModelEndpointConfig {
    fn default() -> Self {
        ModelEndpointConfig {
            base_url: "http://localhost:8000".into(),
            model_name: String::new(),
            temperature: 0.0,
            max_output_tokens: MAX_OUTPUT_TOKENS,
            timeout_ms: 60_000,
            retries: 3,
            backoff_ms: 500,
            concurrency: 4,
            api_key_env: None,
        }
    }
}

impl ModelEndpointConfig {
    pub fn new(base_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        ModelEndpointConfig {
            base_url: base_url.into(),
            model_name: model_name.into(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperature != 0.0 {
            return Err(Error::Config(format!(
                "temperature must be 0 for greedy decoding, got {}",
                self.temperature
            )));
        }
        if self.model_name.is_empty() {
            return Err(Error::Config("model_name is empty".into()));
        }
        if self.max_output_tokens == 0 || self.max_output_tokens > MAX_OUTPUT_TOKENS {
            return Err(Error::Config(format!(
                "max_output_tokens must be in 1..={MAX_OUTPUT_TOKENS}"
            )));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_tokens(&self, _task: Task) -> u32 {
        self.max_output_tokens
    }

    pub fn endpoint_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }
}

pub struct ChatClient {
    config: ModelEndpointConfig,
    http: reqwest::Client,
    api_key: Option<String>,
    calls: AtomicUsize,
}

impl ChatClient {
    pub fn new(config: ModelEndpointConfig) -> Result<Self> {
        config.validate()?;
        let api_key = match &config.api_key_env {
            Some(var) => Some(
                std::env::var(var)
                    .map_err(|_| Error::Config(format!("environment variable {var} is not set")))?,
            ),
            None => None,
        };
        let http = reqwest::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(ChatClient {
            config,
            http,
            api_key,
            calls: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &ModelEndpointConfig {
        &self.config
    }

    /// HTTP requests sent so far, retries included.
    pub fn network_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    /// One user message, greedy decoding. Transient failures (connection,
    /// timeout, 429, 5xx) are retried with exponential backoff.
    pub async fn complete(&self, prompt: &str, task: Task) -> Result<String> {
        let body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0.0,
            "max_tokens": self.config.max_tokens(task),
        });
        let url = self.config.endpoint_url();
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let wait = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                tokio::time::sleep(Duration::from_millis(wait)).await;
            }
            self.calls.fetch_add(1, Ordering::Relaxed);
            let mut req = self.http.post(&url).json(&body);
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = match req.send().await {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.as_u16() == 429 || status.is_server_error() {
                last = format!("HTTP {status}");
                continue;
            }
            if !status.is_success() {
                return Err(Error::Transport(format!("HTTP {status} from {url}")));
            }
            let value: Value = match resp.json().await {
                Ok(v) => v,
                Err(e) if e.is_timeout() => {
                    last = e.to_string();
                    continue;
                }
                Err(e) => return Err(Error::Protocol(format!("response is not JSON: {e}"))),
            };
            return value["choices"][0]["message"]["content"]
                .as_str()
                .map(str::to_string)
                .ok_or_else(|| {
                    Error::Protocol("response lacks choices[0].message.content".into())
                });
        }
        Err(Error::Transport(format!(
            "{url}: giving up after {} attempt(s): {last}",
            self.config.retries + 1
        )))
    }
}
