//! Client for a chat-completions-style annotation endpoint.
//!
//! Jobs carry an image set plus a prompt template; the client sends one chat
//! request with the filled template and the images attached as base64 data
//! URLs, retries 429/5xx and transport errors with exponential backoff, and
//! parses the reply into structured question/answer/rationale items. Batch
//! runs fan out over a bounded worker pool ([`batch`]), and a mock endpoint
//! for tests ships in [`mock`].

pub mod batch;
pub mod mock;
mod templates;

pub use templates::TemplateStore;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use mosaic_core::datagen::{ImageLocation, ImageRef};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default env var holding the endpoint credential.
pub const DEFAULT_API_KEY_ENV: &str = "MOSAIC_API_KEY";

#[derive(Debug, Error)]
pub enum AnnotatorError {
    #[error("template error: {0}")]
    Template(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("credential env var {0} is not set")]
    MissingCredential(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("config error: {0}")]
    Config(String),
}

/// Endpoint and client behavior, loadable from a config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EndpointConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer credential.
    pub api_key_env: String,
    /// Maximum in-flight requests for batch runs.
    pub concurrency: usize,
    /// Optional global request-rate cap, counting retries.
    pub requests_per_minute: Option<u32>,
    pub max_attempts: u32,
    pub request_timeout_secs: u64,
    /// First backoff delay; doubles per retry with ±25% jitter.
    pub backoff_base_ms: u64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8080/v1".to_string(),
            model: "gpt-4o".to_string(),
            api_key_env: DEFAULT_API_KEY_ENV.to_string(),
            concurrency: 4,
            requests_per_minute: None,
            max_attempts: 3,
            request_timeout_secs: 60,
            backoff_base_ms: 1000,
        }
    }
}

/// One annotation request: images plus a template and its variables.
#[derive(Debug, Clone)]
pub struct AnnotationJob {
    pub images: Vec<ImageRef>,
    pub template_id: String,
    pub vars: BTreeMap<String, String>,
    pub max_attempts: u32,
}

impl AnnotationJob {
    pub fn new(images: Vec<ImageRef>, template_id: impl Into<String>) -> Self {
        Self {
            images,
            template_id: template_id.into(),
            vars: BTreeMap::new(),
            max_attempts: 3,
        }
    }

    pub fn var(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.vars.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationStatus {
    Ok,
    ParseFailed,
    TransportFailed,
}

/// Outcome of one annotation call; the raw reply is always retained so a
/// batch can be re-parsed offline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub status: AnnotationStatus,
    pub qa_items: Vec<QaItem>,
    pub raw_response: String,
    pub attempts_used: u32,
}

// Chat-completions wire format.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub messages: Vec<WireMessage>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireMessage {
    pub role: String,
    pub content: Vec<WirePart>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WirePart {
    Text { text: String },
    ImageUrl { image_url: WireImageUrl },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WireImageUrl {
    pub url: String,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    message: WireReplyMessage,
}

#[derive(Debug, Deserialize)]
struct WireReplyMessage {
    content: String,
}

/// Build the chat request for a job: one user message holding the filled
/// template text followed by the images as base64 data URLs, in input order.
pub fn build_request(
    job: &AnnotationJob,
    templates: &TemplateStore,
    model: &str,
) -> Result<WireRequest, AnnotatorError> {
    if job.images.is_empty() {
        return Err(AnnotatorError::Image("job has no images".into()));
    }
    let text = templates.render(&job.template_id, &job.vars)?;
    let mut content = vec![WirePart::Text { text }];
    for image in &job.images {
        let (bytes, mime) = image_bytes(image)?;
        content.push(WirePart::ImageUrl {
            image_url: WireImageUrl {
                url: format!("data:{mime};base64,{}", BASE64.encode(&bytes)),
            },
        });
    }
    Ok(WireRequest {
        model: model.to_string(),
        messages: vec![WireMessage {
            role: "user".to_string(),
            content,
        }],
    })
}

fn image_bytes(image: &ImageRef) -> Result<(Vec<u8>, &'static str), AnnotatorError> {
    match &image.location {
        ImageLocation::Inline(bytes) => Ok((bytes.clone(), sniff_mime(bytes))),
        ImageLocation::Path(path) => {
            let bytes = fs::read(path)
                .map_err(|e| AnnotatorError::Image(format!("cannot read {path:?}: {e}")))?;
            Ok((bytes, mime_for_path(path)))
        }
    }
}

fn mime_for_path(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        _ => "image/png",
    }
}

fn sniff_mime(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(&[0xFF, 0xD8]) {
        "image/jpeg"
    } else {
        "image/png"
    }
}

/// Extract the JSON payload from a reply that may wrap it in a code fence.
pub fn extract_json_block(content: &str) -> &str {
    let trimmed = content.trim();
    for fence in ["```json", "```"] {
        if let Some(start) = trimmed.find(fence) {
            let rest = &trimmed[start + fence.len()..];
            if let Some(end) = rest.find("```") {
                return rest[..end].trim();
            }
        }
    }
    trimmed
}

/// Parse reply content into QA items: a JSON array of objects, or one object.
pub fn parse_qa_items(content: &str) -> Option<Vec<QaItem>> {
    let payload = extract_json_block(content);
    if let Ok(items) = serde_json::from_str::<Vec<QaItem>>(payload) {
        return non_empty(items);
    }
    if let Ok(item) = serde_json::from_str::<QaItem>(payload) {
        return non_empty(vec![item]);
    }
    None
}

fn non_empty(items: Vec<QaItem>) -> Option<Vec<QaItem>> {
    (!items.is_empty()
        && items
            .iter()
            .all(|i| !i.question.is_empty() && !i.answer.is_empty()))
    .then_some(items)
}

/// Shared request-rate gate; spaces request starts so the global rate never
/// exceeds the configured requests-per-minute, retries included.
pub struct RateGate {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateGate {
    pub fn per_minute(requests: u32) -> Self {
        Self {
            interval: Duration::from_secs_f64(60.0 / requests.max(1) as f64),
            next_slot: Mutex::new(Instant::now()),
        }
    }

    /// Block until a request slot is available.
    pub fn acquire(&self) {
        let wait = {
            let mut slot = self.next_slot.lock().unwrap();
            let now = Instant::now();
            let start = (*slot).max(now);
            *slot = start + self.interval;
            start.saturating_duration_since(now)
        };
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Blocking annotation client; cheap to clone and share across threads.
#[derive(Clone)]
pub struct AnnotationClient {
    http: reqwest::blocking::Client,
    config: EndpointConfig,
    api_key: String,
    rate_gate: Option<Arc<RateGate>>,
}

impl AnnotationClient {
    /// Build a client, reading the credential from the configured env var.
    pub fn new(config: EndpointConfig) -> Result<Self, AnnotatorError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| AnnotatorError::MissingCredential(config.api_key_env.clone()))?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.request_timeout_secs))
            .build()
            .map_err(|e| AnnotatorError::Config(e.to_string()))?;
        let rate_gate = config
            .requests_per_minute
            .map(|rpm| Arc::new(RateGate::per_minute(rpm)));
        Ok(Self {
            http,
            config,
            api_key,
            rate_gate,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    /// Run one annotation job to completion.
    ///
    /// HTTP 429/5xx and transport errors are retried with exponential backoff
    /// (base from config, factor 2, ±25% jitter) up to the job's attempt
    /// limit; other failures are terminal. The reply is parsed as a JSON list
    /// of question/answer/rationale objects, possibly inside a code fence.
    pub fn annotate(
        &self,
        job: &AnnotationJob,
        templates: &TemplateStore,
    ) -> Result<AnnotationResult, AnnotatorError> {
        let request = build_request(job, templates, &self.config.model)?;
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let max_attempts = job.max_attempts.max(1);

        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            if let Some(gate) = &self.rate_gate {
                gate.acquire();
            }
            let sent = self
                .http
                .post(&url)
                .bearer_auth(&self.api_key)
                .json(&request)
                .send();
            match sent {
                Ok(response) => {
                    let status = response.status();
                    let body = response.text().unwrap_or_default();
                    if status.is_success() {
                        return Ok(self.parse_reply(body, attempt));
                    }
                    last_error = format!("http {status}");
                    let retryable = status.as_u16() == 429 || status.is_server_error();
                    if !retryable {
                        return Ok(AnnotationResult {
                            status: AnnotationStatus::TransportFailed,
                            qa_items: Vec::new(),
                            raw_response: format!("{last_error}: {body}"),
                            attempts_used: attempt,
                        });
                    }
                }
                Err(e) => last_error = e.to_string(),
            }
            if attempt < max_attempts {
                std::thread::sleep(backoff_delay(self.config.backoff_base_ms, attempt));
            }
        }
        Ok(AnnotationResult {
            status: AnnotationStatus::TransportFailed,
            qa_items: Vec::new(),
            raw_response: last_error,
            attempts_used: max_attempts,
        })
    }

    fn parse_reply(&self, body: String, attempts_used: u32) -> AnnotationResult {
        let content = serde_json::from_str::<WireResponse>(&body)
            .ok()
            .and_then(|r| r.choices.into_iter().next())
            .map(|c| c.message.content);
        let qa_items = content.as_deref().and_then(parse_qa_items);
        match qa_items {
            Some(qa_items) => AnnotationResult {
                status: AnnotationStatus::Ok,
                qa_items,
                raw_response: body,
                attempts_used,
            },
            None => AnnotationResult {
                status: AnnotationStatus::ParseFailed,
                qa_items: Vec::new(),
                raw_response: body,
                attempts_used,
            },
        }
    }
}

/// Exponential backoff with ±25% jitter: `base·2^(attempt−1)` nominal.
fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    let nominal = base_ms.saturating_mul(1u64 << (attempt - 1).min(16)) as f64;
    let jitter = rand::rng().random_range(0.75..=1.25);
    Duration::from_millis((nominal * jitter) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(images: usize) -> AnnotationJob {
        AnnotationJob::new(
            (0..images)
                .map(|i| ImageRef::inline(vec![i as u8; 8]))
                .collect(),
            "slides_qa",
        )
        .var("num_images", images.to_string())
    }

    #[test]
    fn request_has_text_part_then_image_parts() {
        let request = build_request(&job(2), &TemplateStore::builtin(), "m").unwrap();
        assert_eq!(request.messages.len(), 1);
        let content = &request.messages[0].content;
        assert_eq!(content.len(), 3);
        assert!(matches!(content[0], WirePart::Text { .. }));
        assert!(matches!(content[1], WirePart::ImageUrl { .. }));
        assert!(matches!(content[2], WirePart::ImageUrl { .. }));
    }

    #[test]
    fn request_rejects_missing_var() {
        let j =
            AnnotationJob::new(vec![ImageRef::inline(vec![1])], "rationale").var("num_images", "1");
        let err = build_request(&j, &TemplateStore::builtin(), "m").unwrap_err();
        assert!(matches!(err, AnnotatorError::Template(_)));
    }

    #[test]
    fn request_rejects_zero_images() {
        let j = AnnotationJob::new(vec![], "slides_qa").var("num_images", "0");
        assert!(matches!(
            build_request(&j, &TemplateStore::builtin(), "m").unwrap_err(),
            AnnotatorError::Image(_)
        ));
    }

    #[test]
    fn request_rejects_unreadable_image_path() {
        let mut j = job(1);
        j.images[0] = ImageRef {
            location: ImageLocation::Path("/definitely/not/here.png".into()),
            sha256: String::new(),
        };
        assert!(matches!(
            build_request(&j, &TemplateStore::builtin(), "m").unwrap_err(),
            AnnotatorError::Image(_)
        ));
    }

    #[test]
    fn parses_bare_json_array() {
        let items = parse_qa_items(r#"[{"question":"q","answer":"a","rationale":"r"}]"#).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].rationale.as_deref(), Some("r"));
    }

    #[test]
    fn parses_fenced_json() {
        let content = "Here you go:\n```json\n[{\"question\":\"q\",\"answer\":\"a\"}]\n```\nDone.";
        let items = parse_qa_items(content).unwrap();
        assert_eq!(items[0].question, "q");
        assert_eq!(items[0].rationale, None);
    }

    #[test]
    fn parses_single_object() {
        let items = parse_qa_items(r#"{"question":"q","answer":"a"}"#).unwrap();
        assert_eq!(items.len(), 1);
    }

    #[test]
    fn rejects_garbage_and_empty_fields() {
        assert!(parse_qa_items("not json at all").is_none());
        assert!(parse_qa_items("[]").is_none());
        assert!(parse_qa_items(r#"[{"question":"","answer":"a"}]"#).is_none());
    }

    #[test]
    fn data_url_mime_detection() {
        assert_eq!(sniff_mime(&[0xFF, 0xD8, 0xFF]), "image/jpeg");
        assert_eq!(sniff_mime(&[0x89, b'P', b'N', b'G']), "image/png");
        assert_eq!(mime_for_path(Path::new("a.jpeg")), "image/jpeg");
        assert_eq!(mime_for_path(Path::new("a.png")), "image/png");
    }

    #[test]
    fn missing_credential_is_detected() {
        let config = EndpointConfig {
            api_key_env: "MOSAIC_TEST_UNSET_KEY_1234".to_string(),
            ..EndpointConfig::default()
        };
        let err = AnnotationClient::new(config).map(|_| ()).unwrap_err();
        assert!(matches!(err, AnnotatorError::MissingCredential(_)));
    }

    #[test]
    fn rate_gate_spaces_requests() {
        let gate = RateGate::per_minute(1200); // 50 ms apart
        let start = Instant::now();
        for _ in 0..4 {
            gate.acquire();
        }
        // Three gaps at 50 ms each, minus scheduling slop.
        assert!(start.elapsed() >= Duration::from_millis(120));
    }
}
