//! OpenAI-compatible completions client.
//!
//! Sends `POST {base_url}/completions` with `{model, prompt, max_tokens,
//! temperature, stop}` and reads `choices[0].text`. Transport failures, 429
//! and 5xx responses are retried with exponential backoff. A whole call,
//! including waiting for an in-flight slot and backoff sleeps, never runs past
//! `timeout × (max_retries + 1)`.

use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde_json::json;

use super::backend::{GenerationRequest, GeneratorBackend, LlmError};

pub const DEFAULT_API_KEY_ENV: &str = "ARAG_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }

    fn deadline_budget(&self) -> Duration {
        self.timeout.saturating_mul(self.max_retries.saturating_add(1))
    }
}

struct Slots {
    free: Mutex<usize>,
    freed: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

impl Slots {
    fn acquire(&self, deadline: Instant) -> Option<SlotGuard<'_>> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            let remaining = deadline.checked_duration_since(Instant::now())?;
            free = self
                .freed
                .wait_timeout(free, remaining)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        *free -= 1;
        Some(SlotGuard(self))
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
    id: String,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    /// Reads the API key from the configured environment variable, if set.
    pub fn new(config: RemoteConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        Self::with_api_key(config, api_key)
    }

    pub fn with_api_key(config: RemoteConfig, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new().build();
        let id = format!("remote:{}", config.model);
        Self {
            slots: Slots {
                free: Mutex::new(config.max_in_flight.max(1)),
                freed: Condvar::new(),
            },
            config,
            api_key,
            agent,
            id,
        }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, request: &GenerationRequest, timeout: Duration) -> Result<String, LlmError> {
        let body = json!({
            "model": self.config.model,
            "prompt": request.prompt,
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
            "stop": request.stop_sequences,
        });
        let mut call = self
            .agent
            .post(&self.endpoint())
            .timeout(timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        let response = match call.send_json(body) {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(LlmError::Http {
                    status,
                    body: body.chars().take(512).collect(),
                });
            }
            Err(ureq::Error::Transport(t)) => return Err(LlmError::Transport(t.to_string())),
        };
        let value: serde_json::Value = response
            .into_json()
            .map_err(|e| LlmError::Decode(e.to_string()))?;
        value["choices"][0]["text"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Decode("missing choices[0].text".into()))
    }
}

impl GeneratorBackend for RemoteBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let budget = self.config.deadline_budget();
        let deadline = Instant::now() + budget;
        let exceeded = || LlmError::DeadlineExceeded(budget.as_secs_f64());
        let _slot = self.slots.acquire(deadline).ok_or_else(exceeded)?;

        let mut attempts = 0u32;
        loop {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .filter(|d| !d.is_zero())
                .ok_or_else(exceeded)?;
            attempts += 1;
            let err = match self.attempt(request, self.config.timeout.min(remaining)) {
                Ok(text) => return Ok(text),
                Err(e) => e,
            };
            if !err.is_retryable() {
                return Err(err);
            }
            if attempts > self.config.max_retries {
                return Err(LlmError::RetriesExhausted {
                    attempts,
                    last: Box::new(err),
                });
            }
            tracing::warn!(attempt = attempts, error = %err, "retrying completion request");
            let pause = self
                .config
                .backoff
                .saturating_mul(1 << (attempts - 1).min(16));
            let remaining = deadline.saturating_duration_since(Instant::now());
            std::thread::sleep(pause.min(remaining));
        }
    }
}
