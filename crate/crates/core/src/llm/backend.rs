use std::time::Instant;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("generation request has an empty prompt")]
    EmptyPrompt,
    #[error("max_new_tokens must be at least 1")]
    ZeroTokenBudget,
    #[error("temperature must be a finite value >= 0, got {0}")]
    InvalidTemperature(f64),
    #[error("mock backend has no rule matching prompt {prompt_head:?}")]
    NoMockMatch { prompt_head: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
    #[error("request deadline of {0:.1}s exceeded")]
    DeadlineExceeded(f64),
    #[error("malformed completion response: {0}")]
    Decode(String),
}

impl LlmError {
    /// Transport failures, rate limiting and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::Transport(_) => true,
            LlmError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens: 256,
            temperature: 0.0,
            stop_sequences: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LlmError> {
        if self.prompt.is_empty() {
            return Err(LlmError::EmptyPrompt);
        }
        if self.max_new_tokens == 0 {
            return Err(LlmError::ZeroTokenBudget);
        }
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(LlmError::InvalidTemperature(self.temperature));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    /// Wall-clock seconds spent inside the backend call.
    pub latency: f64,
    pub backend_id: String,
}

/// A text-generation service. Implementations must tolerate concurrent calls.
pub trait GeneratorBackend: Send + Sync {
    fn backend_id(&self) -> &str;

    /// Raw completion text for a validated request. Stop sequences may be
    /// forwarded to the service, but [`generate`] truncates regardless.
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError>;
}

/// Cuts `text` before the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..cut]
}

/// Issues one generation call, applies stop sequences and records latency.
pub fn generate(
    backend: &dyn GeneratorBackend,
    request: &GenerationRequest,
) -> Result<GenerationResponse, LlmError> {
    request.validate()?;
    let started = Instant::now();
    let raw = backend.complete(request)?;
    let latency = started.elapsed().as_secs_f64();
    Ok(GenerationResponse {
        text: truncate_at_stop(&raw, &request.stop_sequences).to_string(),
        latency,
        backend_id: backend.backend_id().to_string(),
    })
}
