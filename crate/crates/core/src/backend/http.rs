//! Completions over an OpenAI-compatible HTTP endpoint.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{apply_stops, BackendError, CompletionBackend, CompletionRequest};

/// Environment variable holding the API secret.
pub const API_KEY_ENV: &str = "DIALOGIC_API_KEY";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(skip)]
    pub api_key: Option<String>,
    pub timeout_secs: u64,
    pub max_concurrency: usize,
    /// Sustained request rate; `None` disables the limiter.
    pub requests_per_second: Option<f64>,
    /// Retries for rate limits, timeouts and 5xx responses.
    pub retries: u32,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/completions".into(),
            model: "text-davinci-002".into(),
            api_key: None,
            timeout_secs: 60,
            max_concurrency: 4,
            requests_per_second: Some(1.0),
            retries: 5,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
        }
    }
}

struct Semaphore {
    state: Mutex<(usize, usize)>, // (in flight, peak)
    cv: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(limit: usize) -> Self {
        Self { state: Mutex::new((0, 0)), cv: Condvar::new(), limit: limit.max(1) }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut s = self.state.lock().expect("semaphore poisoned");
        while s.0 >= self.limit {
            s = self.cv.wait(s).expect("semaphore poisoned");
        }
        s.0 += 1;
        s.1 = s.1.max(s.0);
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut s = self.0.state.lock().expect("semaphore poisoned");
        s.0 -= 1;
        self.0.cv.notify_one();
    }
}

struct TokenBucket {
    rate: f64,
    capacity: f64,
    tokens: f64,
    last: Instant,
}

impl TokenBucket {
    /// Takes a token or returns how long to wait for one.
    fn try_take(&mut self) -> Option<Duration> {
        let now = Instant::now();
        self.tokens = (self.tokens + now.duration_since(self.last).as_secs_f64() * self.rate).min(self.capacity);
        self.last = now;
        if self.tokens >= 1.0 {
            self.tokens -= 1.0;
            None
        } else {
            Some(Duration::from_secs_f64((1.0 - self.tokens) / self.rate))
        }
    }
}

pub struct HttpBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    permits: Semaphore,
    bucket: Option<Mutex<TokenBucket>>,
}

enum Attempt {
    Done(String),
    Retry(BackendError, Option<Duration>),
    Fatal(BackendError),
}

impl HttpBackend {
    /// Falls back to the `DIALOGIC_API_KEY` environment variable when the
    /// config carries no key.
    pub fn new(mut cfg: HttpConfig) -> Result<Self, BackendError> {
        if cfg.api_key.is_none() {
            cfg.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs.max(1)))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let bucket = cfg.requests_per_second.filter(|r| *r > 0.0).map(|rate| {
            let capacity = cfg.max_concurrency.max(1) as f64;
            Mutex::new(TokenBucket { rate, capacity, tokens: capacity, last: Instant::now() })
        });
        Ok(Self { permits: Semaphore::new(cfg.max_concurrency), client, bucket, cfg })
    }

    /// Highest number of simultaneous in-flight requests seen so far.
    pub fn peak_in_flight(&self) -> usize {
        self.permits.state.lock().expect("semaphore poisoned").1
    }

    fn throttle(&self) {
        let Some(bucket) = &self.bucket else { return };
        loop {
            let wait = bucket.lock().expect("limiter poisoned").try_take();
            match wait {
                None => return,
                Some(d) => thread::sleep(d),
            }
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.cfg.backoff_base_ms.saturating_mul(1u64 << attempt.min(20)).min(self.cfg.backoff_max_ms);
        let jitter = rand::rng().random_range(0..=base / 2);
        Duration::from_millis(base + jitter)
    }

    fn attempt(&self, req: &CompletionRequest) -> Attempt {
        let body = json!({
            "model": self.cfg.model,
            "prompt": req.prompt,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
            "top_p": req.top_p,
            "frequency_penalty": req.frequency_penalty,
            "stop": req.stop,
        });
        self.throttle();
        let _permit = self.permits.acquire();
        let mut rb = self.client.post(&self.cfg.endpoint).json(&body);
        if let Some(key) = &self.cfg.api_key {
            rb = rb.bearer_auth(key);
        }
        let resp = match rb.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout, None),
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string()), None),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<u64>().ok())
            .map(Duration::from_secs);
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(BackendError::Timeout, None),
            Err(e) => return Attempt::Retry(BackendError::Transport(e.to_string()), None),
        };
        let excerpt: String = text.chars().take(300).collect();
        match status {
            200..=299 => {}
            429 => return Attempt::Retry(BackendError::RateLimited { attempts: 0 }, retry_after),
            400 | 413 if is_context_error(&text) => return Attempt::Fatal(BackendError::ContextLength(excerpt)),
            500..=599 => return Attempt::Retry(BackendError::Api { status, body: excerpt }, retry_after),
            _ => return Attempt::Fatal(BackendError::Api { status, body: excerpt }),
        }
        let parsed: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(_) => return Attempt::Fatal(BackendError::Api { status, body: excerpt }),
        };
        match parsed.pointer("/choices/0/text").and_then(|v| v.as_str()) {
            Some(t) => Attempt::Done(apply_stops(t, &req.stop)),
            None => Attempt::Fatal(BackendError::Api { status, body: excerpt }),
        }
    }
}

fn is_context_error(body: &str) -> bool {
    let b = body.to_lowercase();
    b.contains("context_length_exceeded") || b.contains("maximum context length")
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        req.validate(false)?;
        let mut attempt = 0u32;
        loop {
            match self.attempt(req) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e, hint) => {
                    if attempt >= self.cfg.retries {
                        return Err(match e {
                            BackendError::RateLimited { .. } => BackendError::RateLimited { attempts: attempt + 1 },
                            other => other,
                        });
                    }
                    let wait = hint.map_or_else(
                        || self.backoff(attempt),
                        |h| h.min(Duration::from_millis(self.cfg.backoff_max_ms)),
                    );
                    log::warn!("completion attempt {} failed ({e}); retrying in {wait:?}", attempt + 1);
                    thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }

    fn name(&self) -> &str {
        "http"
    }

    fn concurrency_limit(&self) -> usize {
        self.cfg.max_concurrency.max(1)
    }
}
