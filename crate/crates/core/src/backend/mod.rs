//! Text-completion backends: live HTTP, transcript replay, recording and mocks.

mod http;
mod mock;
mod replay;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, API_KEY_ENV};
pub use mock::{MockBackend, MockMode};
pub use replay::{load_transcript, RecordingBackend, ReplayBackend, TranscriptRecord};

use crate::config::DecodeParams;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BackendError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("request timed out")]
    Timeout,
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("API returned {status}: {body}")]
    Api { status: u16, body: String },
    #[error("prompt exceeds the model context: {0}")]
    ContextLength(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded completion for prompt digest {digest}")]
    UnknownPrompt { digest: String },
    #[error("scripted completions exhausted")]
    Exhausted,
    #[error("transcript I/O: {0}")]
    Io(String),
}

impl BackendError {
    /// Stable kind label for reports.
    pub fn kind(&self) -> &'static str {
        match self {
            BackendError::InvalidRequest(_) => "invalid_request",
            BackendError::Timeout => "timeout",
            BackendError::RateLimited { .. } => "rate_limited",
            BackendError::Api { .. } => "api",
            BackendError::ContextLength(_) => "context_length",
            BackendError::Transport(_) => "transport",
            BackendError::UnknownPrompt { .. } => "unknown_prompt",
            BackendError::Exhausted => "exhausted",
            BackendError::Io(_) => "io",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub stop: Vec<String>,
}

impl CompletionRequest {
    pub fn new(prompt: String, decode: &DecodeParams, stop: &[&str]) -> Self {
        Self {
            prompt,
            max_tokens: decode.max_tokens,
            temperature: decode.temperature,
            top_p: decode.top_p,
            frequency_penalty: decode.frequency_penalty,
            stop: stop.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self, require_stop: bool) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if !(0.0..=2.0).contains(&self.top_p) {
            return Err(BackendError::InvalidRequest(format!("top_p {} outside [0, 2]", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens is 0".into()));
        }
        if require_stop && self.stop.iter().all(|s| s.is_empty()) {
            return Err(BackendError::InvalidRequest("turn generation requires stop sequences".into()));
        }
        Ok(())
    }
}

/// A source of completions. Implementations must tolerate concurrent calls.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError>;
    fn name(&self) -> &str;
    /// Maximum useful number of concurrent callers.
    fn concurrency_limit(&self) -> usize {
        1
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(req)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn concurrency_limit(&self) -> usize {
        (**self).concurrency_limit()
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(req)
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn concurrency_limit(&self) -> usize {
        (**self).concurrency_limit()
    }
}

/// Cuts `text` at the earliest stop sequence and trims trailing whitespace.
pub fn apply_stops(text: &str, stops: &[String]) -> String {
    let cut = stops.iter().filter(|s| !s.is_empty()).filter_map(|s| text.find(s.as_str())).min();
    text[..cut.unwrap_or(text.len())].trim_end().to_string()
}

/// Hex SHA-256 of a prompt; the transcript key.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}
