//! Structured-completion client with record/replay transcripts.
//!
//! Every call goes through [`Gateway::complete_structured`], which strips the
//! response down to its single fenced block, parses it as JSON and validates
//! it against a [`Schema`]. Invalid responses are retried with a fixed
//! correction message appended to the prompt.

mod backend;
mod limiter;
pub mod schema;
mod template;

use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{
    AnswerKeyEntry, CompletionBackend, HttpBackend, HttpConfig, RecordingBackend, ReplayBackend, Request,
    ScriptedBackend, Transcript, TranscriptEntry,
};
pub use limiter::TokenBucket;
pub use schema::{Schema, Violation};
pub use template::{Exemplar, PromptTemplate, RenderedPrompt};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("response failed validation after {attempts} attempt(s): {violation}")]
    SchemaViolation { attempts: u32, violation: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no recorded response for prompt {hash} ({template} / {subject})")]
    ReplayMiss { hash: String, template: String, subject: String },
    #[error("missing prompt slot {0:?}")]
    MissingSlot(String),
    #[error("invalid prompt template: {0}")]
    InvalidTemplate(String),
    #[error("invalid transcript: {0}")]
    Transcript(String),
    #[error("io: {0}")]
    Io(String),
}

/// Stable hash of a rendered prompt: SHA-256 over the text with line
/// endings normalized to `\n`.
pub fn prompt_hash(prompt: &str) -> String {
    let normalized = prompt.replace("\r\n", "\n").replace('\r', "\n");
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

static FENCE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n(.*?)```").unwrap());

/// Pulls the JSON value out of a response that must contain exactly one
/// fenced block.
pub fn parse_fenced(response: &str) -> Result<Value, String> {
    let blocks: Vec<&str> = FENCE.captures_iter(response).map(|c| c.get(1).unwrap().as_str()).collect();
    match blocks.as_slice() {
        [] => Err("response does not contain a fenced ```json block".into()),
        [one] => serde_json::from_str(one.trim()).map_err(|e| format!("fenced block is not valid JSON: {e}")),
        _ => Err(format!("response contains {} fenced blocks, expected one", blocks.len())),
    }
}

/// The retry message appended after a rejected response.
pub fn correction_message(violation: &str) -> String {
    format!(
        "\n\n## Correction\nYour previous response was rejected: {violation}. \
         Reply again with exactly one fenced ```json block that satisfies the required output format."
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub value: Value,
    pub retries: u32,
}

#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn CompletionBackend>,
    limiter: Option<Arc<TokenBucket>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("live", &self.backend.is_live())
            .field("rate_limited", &self.limiter.is_some())
            .finish()
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn CompletionBackend>) -> Self {
        Self { backend, limiter: None }
    }

    /// Limits live requests to `requests_per_minute`; ignored for offline backends.
    pub fn with_rate_limit(mut self, requests_per_minute: f64) -> Self {
        if self.backend.is_live() {
            self.limiter = Some(Arc::new(TokenBucket::per_minute(requests_per_minute)));
        }
        self
    }

    pub fn replay(transcript: Transcript) -> Self {
        Self::new(Arc::new(ReplayBackend::new(transcript)))
    }

    pub fn backend(&self) -> &Arc<dyn CompletionBackend> {
        &self.backend
    }

    pub fn complete_structured(
        &self,
        prompt: &RenderedPrompt,
        schema: &Schema,
        retries: u32,
    ) -> Result<Completion, GatewayError> {
        let mut text = prompt.text.clone();
        let mut attempt = 0;
        loop {
            if let Some(l) = &self.limiter {
                l.acquire();
            }
            let raw = self.backend.complete(&Request {
                template: &prompt.template,
                subject: &prompt.subject,
                prompt: &text,
                attempt,
            })?;
            let outcome = parse_fenced(&raw).and_then(|v| schema.validate(&v).map(|_| v).map_err(|e| e.to_string()));
            match outcome {
                Ok(value) => return Ok(Completion { value, retries: attempt }),
                Err(violation) if attempt < retries => {
                    log::debug!("{}/{}: retrying after {violation}", prompt.template, prompt.subject);
                    text.push_str(&correction_message(&violation));
                    attempt += 1;
                }
                Err(violation) => return Err(GatewayError::SchemaViolation { attempts: attempt + 1, violation }),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::schema::*;
    use super::*;

    fn prompt(text: &str) -> RenderedPrompt {
        RenderedPrompt { template: "t".into(), subject: "s".into(), text: text.into() }
    }

    fn schema() -> Schema {
        Schema::Object(vec![req("n", Schema::Number)])
    }

    #[test]
    fn hash_ignores_line_endings() {
        assert_eq!(prompt_hash("a\r\nb\rc"), prompt_hash("a\nb\nc"));
        assert_eq!(prompt_hash("x").len(), 64);
    }

    #[test]
    fn fenced_block_required() {
        assert!(parse_fenced("{\"n\":1}").is_err());
        assert_eq!(parse_fenced("Sure!\n```json\n{\"n\":1}\n```\nDone").unwrap()["n"], 1);
        assert!(parse_fenced("```json\n{}\n```\n```json\n{}\n```").is_err());
    }

    #[test]
    fn replay_happy_path() {
        let p = prompt("q");
        let t = Transcript::from_entries([(prompt_hash("q"), "```json\n{\"n\": 3}\n```".to_string())]).unwrap();
        let c = Gateway::replay(t).complete_structured(&p, &schema(), 2).unwrap();
        assert_eq!(c.value["n"], 3);
        assert_eq!(c.retries, 0);
    }

    #[test]
    fn one_retry_consumes_two_entries() {
        let p = prompt("q");
        let bad = "```json\n{\"n\": \"three\"}\n```";
        let violation = parse_fenced(bad).and_then(|v| schema().validate(&v).map_err(|e| e.to_string())).unwrap_err();
        let retry_text = format!("q{}", correction_message(&violation));
        let t = Transcript::from_entries([
            (prompt_hash("q"), bad.to_string()),
            (prompt_hash(&retry_text), "```json\n{\"n\": 3}\n```".to_string()),
        ])
        .unwrap();
        let recorder = RecordingBackend::new(Arc::new(ReplayBackend::new(t)));
        let recorder = Arc::new(recorder);
        let c = Gateway::new(recorder.clone()).complete_structured(&p, &schema(), 2).unwrap();
        assert_eq!(c.retries, 1);
        assert_eq!(recorder.transcript().len(), 2);
    }

    #[test]
    fn exhausted_retries() {
        let p = prompt("q");
        let backend = ScriptedBackend::from_entries([AnswerKeyEntry {
            template: "t".into(),
            subject: "s".into(),
            response: Value::String("no fence here".into()),
        }])
        .unwrap();
        let err = Gateway::new(Arc::new(backend)).complete_structured(&p, &schema(), 2).unwrap_err();
        assert!(matches!(err, GatewayError::SchemaViolation { attempts: 3, .. }));
    }

    #[test]
    fn replay_miss() {
        let t = Transcript::default();
        let err = Gateway::replay(t).complete_structured(&prompt("q"), &schema(), 0).unwrap_err();
        assert!(matches!(err, GatewayError::ReplayMiss { .. }));
    }
}
