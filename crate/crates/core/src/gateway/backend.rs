use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{prompt_hash, GatewayError};

#[derive(Debug, Clone, Copy)]
pub struct Request<'a> {
    pub template: &'a str,
    pub subject: &'a str,
    pub prompt: &'a str,
    pub attempt: u32,
}

pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &Request<'_>) -> Result<String, GatewayError>;

    fn is_live(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub hash: String,
    pub response: String,
}

/// Recorded responses keyed by prompt hash. Immutable once loaded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    entries: BTreeMap<String, String>,
}

impl Transcript {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, String)>) -> Result<Self, GatewayError> {
        let mut map = BTreeMap::new();
        for (hash, response) in entries {
            if let Some(prev) = map.insert(hash.clone(), response.clone()) {
                if prev != response {
                    return Err(GatewayError::Transcript(format!("conflicting responses for hash {hash}")));
                }
            }
        }
        Ok(Self { entries: map })
    }

    pub fn parse_jsonl(src: &str) -> Result<Self, GatewayError> {
        let mut entries = Vec::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: TranscriptEntry =
                serde_json::from_str(line).map_err(|e| GatewayError::Transcript(format!("line {}: {e}", i + 1)))?;
            entries.push((e.hash, e.response));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let src = fs::read_to_string(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_jsonl(&src)
    }

    /// JSON lines sorted by hash.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (hash, response) in &self.entries {
            let line = serde_json::to_string(&TranscriptEntry { hash: hash.clone(), response: response.clone() })
                .expect("entry serializes");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let io = |e: std::io::Error| GatewayError::Io(format!("{}: {e}", path.display()));
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }

    pub fn get(&self, hash: &str) -> Option<&str> {
        self.entries.get(hash).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ReplayBackend {
    transcript: Transcript,
}

impl ReplayBackend {
    pub fn new(transcript: Transcript) -> Self {
        Self { transcript }
    }
}

impl CompletionBackend for ReplayBackend {
    fn complete(&self, request: &Request<'_>) -> Result<String, GatewayError> {
        let hash = prompt_hash(request.prompt);
        self.transcript.get(&hash).map(str::to_string).ok_or_else(|| GatewayError::ReplayMiss {
            hash,
            template: request.template.to_string(),
            subject: request.subject.to_string(),
        })
    }
}

/// Passes requests to `inner` and keeps every (hash, response) pair.
pub struct RecordingBackend {
    inner: Arc<dyn CompletionBackend>,
    entries: Mutex<BTreeMap<String, String>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn CompletionBackend>) -> Self {
        Self { inner, entries: Mutex::new(BTreeMap::new()) }
    }

    pub fn transcript(&self) -> Transcript {
        Transcript { entries: self.entries.lock().unwrap().clone() }
    }
}

impl CompletionBackend for RecordingBackend {
    fn complete(&self, request: &Request<'_>) -> Result<String, GatewayError> {
        let response = self.inner.complete(request)?;
        let hash = prompt_hash(request.prompt);
        let mut entries = self.entries.lock().unwrap();
        match entries.get(&hash) {
            // a replay could only ever return one of the two answers
            Some(prev) if *prev != response => Err(GatewayError::Transcript(format!(
                "{} {}: same prompt as an earlier request but a different response",
                request.template, request.subject
            ))),
            _ => {
                entries.insert(hash, response.clone());
                Ok(response)
            }
        }
    }

    fn is_live(&self) -> bool {
        self.inner.is_live()
    }
}

/// One hand-authored answer: the response a model should give for
/// `template` about `subject`. Non-string responses are wrapped in a fenced
/// JSON block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKeyEntry {
    pub template: String,
    pub subject: String,
    pub response: Value,
}

/// Answers from an answer key, used to author replay transcripts offline.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    answers: BTreeMap<(String, String), String>,
}

impl ScriptedBackend {
    pub fn from_entries(entries: impl IntoIterator<Item = AnswerKeyEntry>) -> Result<Self, GatewayError> {
        let mut answers = BTreeMap::new();
        for e in entries {
            let text = match e.response {
                Value::String(s) => s,
                v => format!("```json\n{}\n```", serde_json::to_string_pretty(&v).unwrap()),
            };
            let key = (e.template, e.subject);
            if answers.insert(key.clone(), text).is_some() {
                return Err(GatewayError::Transcript(format!("duplicate answer for {key:?}")));
            }
        }
        Ok(Self { answers })
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let f = fs::File::open(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line)
                    .map_err(|e| GatewayError::Transcript(format!("answer key line {}: {e}", i + 1)))?,
            );
        }
        Self::from_entries(entries)
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&self, request: &Request<'_>) -> Result<String, GatewayError> {
        self.answers.get(&(request.template.to_string(), request.subject.to_string())).cloned().ok_or_else(|| {
            GatewayError::ReplayMiss {
                hash: prompt_hash(request.prompt),
                template: request.template.to_string(),
                subject: request.subject.to_string(),
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpConfig {
    /// Chat-completions style endpoint URL.
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

/// Live backend for an OpenAI-compatible chat completions endpoint.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    config: HttpConfig,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        Self { config }
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &Request<'_>) -> Result<String, GatewayError> {
        let key = std::env::var(&self.config.api_key_env).map_err(|_| {
            GatewayError::Transport(format!("environment variable {} is not set", self.config.api_key_env))
        })?;
        let body = json!({
            "model": self.config.model,
            "temperature": 0,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        let mut resp = ureq::post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let v: Value = resp.body_mut().read_json().map_err(|e| GatewayError::Transport(e.to_string()))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::Transport("response has no choices[0].message.content".into()))
    }

    fn is_live(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transcript_jsonl_round_trip() {
        let t = Transcript::from_entries([("b".into(), "2".into()), ("a".into(), "1".into())]).unwrap();
        let text = t.to_jsonl();
        assert!(text.starts_with("{\"hash\":\"a\""));
        assert_eq!(Transcript::parse_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn recorder_rejects_one_prompt_with_two_answers() {
        let key = ScriptedBackend::from_entries([
            AnswerKeyEntry { template: "t".into(), subject: "a".into(), response: Value::String("1".into()) },
            AnswerKeyEntry { template: "t".into(), subject: "b".into(), response: Value::String("2".into()) },
        ])
        .unwrap();
        let rec = RecordingBackend::new(Arc::new(key));
        let req = |subject| Request { template: "t", subject, prompt: "same text", attempt: 0 };
        assert_eq!(rec.complete(&req("a")).unwrap(), "1");
        assert!(matches!(rec.complete(&req("b")), Err(GatewayError::Transcript(_))));
        assert_eq!(rec.transcript().len(), 1);
    }

    #[test]
    fn conflicting_entries_rejected() {
        assert!(Transcript::from_entries([("a".into(), "1".into()), ("a".into(), "2".into())]).is_err());
        assert!(Transcript::from_entries([("a".into(), "1".into()), ("a".into(), "1".into())]).is_ok());
    }

    #[test]
    fn http_backend_without_key_is_transport_error() {
        let b = HttpBackend::new(HttpConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model: "m".into(),
            api_key_env: "CELLMINE_TEST_KEY_THAT_IS_NOT_SET".into(),
        });
        let r = Request { template: "t", subject: "s", prompt: "p", attempt: 0 };
        assert!(matches!(b.complete(&r), Err(GatewayError::Transport(_))));
        assert!(b.is_live());
    }
}
