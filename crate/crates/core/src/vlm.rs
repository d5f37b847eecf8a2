//! Vision-language model backends and answer parsing.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::http::{self, HttpFailure};
use crate::image::Image;
use crate::prompt::PromptInstance;
use crate::stitch::ViewConfiguration;
use crate::synth::mock::MARKER_SIZE;

pub const MOCK_ENDPOINT: &str = "builtin:mock";
const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBackend {
    pub name: String,
    /// Service URL, or `builtin:mock`.
    pub endpoint: String,
    pub request_timeout_secs: f64,
    pub max_retries: u32,
    /// First retry delay; doubles on each further attempt.
    pub backoff_ms: u64,
    #[serde(skip_serializing)]
    pub token: Option<String>,
}

impl Default for ModelBackend {
    fn default() -> Self {
        ModelBackend::mock()
    }
}

impl ModelBackend {
    pub fn mock() -> Self {
        ModelBackend {
            name: "mock".into(),
            endpoint: MOCK_ENDPOINT.into(),
            request_timeout_secs: 60.0,
            max_retries: 3,
            backoff_ms: 500,
            token: None,
        }
    }

    pub fn http(name: impl Into<String>, endpoint: impl Into<String>) -> Self {
        ModelBackend { name: name.into(), endpoint: endpoint.into(), ..ModelBackend::mock() }
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint == MOCK_ENDPOINT
    }

    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.name.trim().is_empty() {
            problems.push("backend name is empty".to_string());
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            problems.push(format!("backend {}: request timeout must be positive", self.name));
        }
        if self.endpoint.trim().is_empty() {
            problems.push(format!("backend {}: endpoint is empty", self.name));
        }
        problems
    }

    pub fn backoff(&self, attempt: u32) -> Duration {
        let base = Duration::from_millis(self.backoff_ms);
        base.checked_mul(1u32 << attempt.min(16)).unwrap_or(MAX_BACKOFF).min(MAX_BACKOFF)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub example_id: String,
    pub raw_text: String,
    pub parsed: Answer,
    pub configuration: ViewConfiguration,
    pub prompt_on: bool,
    pub latency_secs: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum InferError {
    #[error("inference backend failed for {example_id} after {attempts} attempt(s): {message}")]
    Backend { example_id: String, attempts: u32, message: String },
    #[error("inference protocol error for {example_id}: {message}")]
    Protocol { example_id: String, message: String },
}

const AFFIRMATIVE: [&str; 3] = ["yes", "true", "correct"];
const NEGATIVE: [&str; 3] = ["no", "false", "incorrect"];

/// Maps a free-text reply to a binary answer by its first polarity token.
/// Case and punctuation are ignored; no polarity token gives `Unknown`.
pub fn parse_answer(raw_text: &str) -> Answer {
    let cleaned: String = raw_text
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    let mut first_yes = None;
    let mut first_no = None;
    for (i, tok) in cleaned.split_whitespace().enumerate() {
        if first_yes.is_none() && AFFIRMATIVE.contains(&tok) {
            first_yes = Some(i);
        }
        if first_no.is_none() && NEGATIVE.contains(&tok) {
            first_no = Some(i);
        }
        if first_yes.is_some() && first_no.is_some() {
            break;
        }
    }
    match (first_yes, first_no) {
        (Some(y), Some(n)) if y < n => Answer::Yes,
        (Some(y), Some(n)) if n < y => Answer::No,
        (Some(_), None) => Answer::Yes,
        (None, Some(_)) => Answer::No,
        _ => Answer::Unknown,
    }
}

pub trait VlmClient: Send + Sync {
    fn name(&self) -> &str;

    /// Returns the raw reply for one prompted image.
    fn infer(&self, example_id: &str, image: &Image, prompt: &PromptInstance) -> Result<String, InferError>;

    /// Number of requests attempted so far, retries included.
    fn calls(&self) -> u64;
}

/// Deterministic replies keyed by the question, the rendered prompt and the
/// top-left marker block of the image.
pub struct MockVlm {
    name: String,
    calls: AtomicU64,
}

impl MockVlm {
    pub fn new(name: impl Into<String>) -> Self {
        MockVlm { name: name.into(), calls: AtomicU64::new(0) }
    }

    pub fn reply(image: &Image, prompt: &PromptInstance) -> String {
        let mut h = Sha256::new();
        h.update(prompt.question.as_bytes());
        h.update([0]);
        h.update(prompt.text.as_bytes());
        h.update([0]);
        h.update(image.width().to_le_bytes());
        h.update(image.height().to_le_bytes());
        for y in 0..MARKER_SIZE.min(image.height()) {
            for x in 0..MARKER_SIZE.min(image.width()) {
                h.update(image.pixel(x, y));
            }
        }
        let digest = h.finalize();
        match digest[0] % 8 {
            0..=3 => "Yes, that is correct.".to_string(),
            4..=6 => "No, the relation does not hold.".to_string(),
            _ => "I cannot tell from this image.".to_string(),
        }
    }
}

impl VlmClient for MockVlm {
    fn name(&self) -> &str {
        &self.name
    }

    fn infer(&self, _example_id: &str, image: &Image, prompt: &PromptInstance) -> Result<String, InferError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(MockVlm::reply(image, prompt))
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VlmRequest {
    pub image: String,
    pub prompt: String,
}

#[derive(Debug, Deserialize)]
struct VlmReply {
    #[serde(default)]
    text: Option<String>,
}

/// Extracts `text` from a reply body; a missing or null field is an empty reply.
pub fn decode_reply(body: &[u8], example_id: &str) -> Result<String, InferError> {
    let reply: VlmReply = serde_json::from_slice(body).map_err(|e| InferError::Protocol {
        example_id: example_id.to_string(),
        message: format!("reply JSON: {e}"),
    })?;
    Ok(reply.text.unwrap_or_default())
}

/// JSON-over-HTTP client with exponential backoff on transport failures
/// and retryable statuses (429 and 5xx).
pub struct HttpVlm {
    backend: ModelBackend,
    agent: ureq::Agent,
    calls: AtomicU64,
}

impl HttpVlm {
    pub fn new(backend: ModelBackend) -> Self {
        let agent = http::agent(Duration::from_secs_f64(backend.request_timeout_secs));
        HttpVlm { backend, agent, calls: AtomicU64::new(0) }
    }
}

impl VlmClient for HttpVlm {
    fn name(&self) -> &str {
        &self.backend.name
    }

    fn infer(&self, example_id: &str, image: &Image, prompt: &PromptInstance) -> Result<String, InferError> {
        let png = image.to_png().map_err(|e| InferError::Protocol {
            example_id: example_id.to_string(),
            message: e.to_string(),
        })?;
        let request = VlmRequest { image: STANDARD.encode(png), prompt: prompt.text.clone() };
        let mut attempt = 0u32;
        loop {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let result =
                http::post_json(&self.agent, &self.backend.endpoint, self.backend.token.as_deref(), &request);
            let failure = match result {
                Ok(body) => return decode_reply(&body, example_id),
                Err(f) => f,
            };
            let retryable = match &failure {
                HttpFailure::Transport(_) | HttpFailure::Body(_) => true,
                HttpFailure::Status(code, _) => *code == 429 || *code >= 500,
            };
            attempt += 1;
            if !retryable || attempt > self.backend.max_retries {
                return Err(InferError::Backend {
                    example_id: example_id.to_string(),
                    attempts: attempt,
                    message: failure.to_string(),
                });
            }
            let delay = self.backend.backoff(attempt - 1);
            log::debug!("{example_id}: attempt {attempt} failed ({failure}); retrying in {delay:?}");
            std::thread::sleep(delay);
        }
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

/// Builds the client for `backend`; `VLM_TOKEN` fills in a missing token
/// for HTTP backends.
pub fn connect(backend: &ModelBackend) -> Arc<dyn VlmClient> {
    if backend.is_mock() {
        return Arc::new(MockVlm::new(backend.name.clone()));
    }
    let mut backend = backend.clone();
    if backend.token.is_none() {
        backend.token = std::env::var("VLM_TOKEN").ok().filter(|s| !s.is_empty());
    }
    Arc::new(HttpVlm::new(backend))
}
