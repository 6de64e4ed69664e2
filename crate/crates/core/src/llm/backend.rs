//! Text-generation backends.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no scripted completion for prompt {fingerprint} ({excerpt:?}...)")]
    UnknownPrompt { fingerprint: String, excerpt: String },
    #[error("backend returned no completions")]
    Empty,
    #[error("backend request failed: {0}")]
    Transport(String),
    #[error("invalid backend script: {0}")]
    Script(String),
}

/// Source of ranked completions for a prompt.
///
/// Live implementations are expected to sample several candidates (top-p)
/// and return them best first. Implementations are shared across worker
/// threads.
pub trait GenerationBackend: Send + Sync {
    fn generate(&self, prompt: &str, max_candidates: usize) -> Result<Vec<String>, BackendError>;
}

impl<B: GenerationBackend + ?Sized> GenerationBackend for &B {
    fn generate(&self, prompt: &str, max_candidates: usize) -> Result<Vec<String>, BackendError> {
        (**self).generate(prompt, max_candidates)
    }
}

/// Stable prompt key: SHA-256 of the prompt with whitespace runs collapsed.
pub fn fingerprint(prompt: &str) -> String {
    let normalized = prompt.split_whitespace().collect::<Vec<_>>().join(" ");
    let digest = Sha256::digest(normalized.as_bytes());
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

/// Deterministic backend replaying canned completions keyed by prompt fingerprint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScriptedBackend {
    script: BTreeMap<String, Vec<String>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers ranked completions for `prompt`, replacing earlier ones.
    pub fn insert(&mut self, prompt: &str, completions: Vec<String>) {
        self.script.insert(fingerprint(prompt), completions);
    }

    pub fn with(mut self, prompt: &str, completions: &[&str]) -> Self {
        self.insert(prompt, completions.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn len(&self) -> usize {
        self.script.len()
    }

    pub fn is_empty(&self) -> bool {
        self.script.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serialization is infallible")
    }

    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        serde_json::from_str(json).map_err(|e| BackendError::Script(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

impl GenerationBackend for ScriptedBackend {
    fn generate(&self, prompt: &str, max_candidates: usize) -> Result<Vec<String>, BackendError> {
        let fp = fingerprint(prompt);
        match self.script.get(&fp) {
            Some(c) if c.is_empty() => Err(BackendError::Empty),
            Some(c) => Ok(c.iter().take(max_candidates.max(1)).cloned().collect()),
            None => Err(BackendError::UnknownPrompt {
                fingerprint: fp,
                excerpt: prompt.chars().rev().take(80).collect::<Vec<_>>().into_iter().rev().collect(),
            }),
        }
    }
}

/// Settings for an OpenAI-style `/completions` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_top_p")]
    pub top_p: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_top_p() -> f64 {
    0.95
}
fn default_temperature() -> f64 {
    0.7
}
fn default_max_tokens() -> u32 {
    256
}
fn default_timeout() -> u64 {
    60
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    n: usize,
    top_p: f64,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
    #[serde(default)]
    index: usize,
}

/// Live backend posting to `{base_url}/completions`.
pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(Self { config, client })
    }
}

impl GenerationBackend for HttpBackend {
    fn generate(&self, prompt: &str, max_candidates: usize) -> Result<Vec<String>, BackendError> {
        let url = format!("{}/completions", self.config.base_url.trim_end_matches('/'));
        let body = CompletionRequest {
            model: &self.config.model,
            prompt,
            n: max_candidates.max(1),
            top_p: self.config.top_p,
            temperature: self.config.temperature,
            max_tokens: self.config.max_tokens,
        };
        let mut req = self.client.post(&url).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(BackendError::Transport(format!("{url} returned {status}")));
        }
        let mut parsed: CompletionResponse =
            resp.json().map_err(|e| BackendError::Transport(e.to_string()))?;
        parsed.choices.sort_by_key(|c| c.index);
        if parsed.choices.is_empty() {
            return Err(BackendError::Empty);
        }
        Ok(parsed.choices.into_iter().map(|c| c.text).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    #[test]
    fn fingerprint_ignores_whitespace_layout() {
        assert_eq!(fingerprint("a  b\nc"), fingerprint(" a b c "));
        assert_ne!(fingerprint("a b"), fingerprint("a c"));
        assert_eq!(fingerprint("x").len(), 32);
    }

    #[test]
    fn scripted_unknown_prompt_is_error() {
        let b = ScriptedBackend::new().with("known", &["1"]);
        assert_eq!(b.generate("known", 8).unwrap(), vec!["1"]);
        assert!(matches!(b.generate("other", 8), Err(BackendError::UnknownPrompt { .. })));
    }

    #[test]
    fn scripted_respects_candidate_cap() {
        let b = ScriptedBackend::new().with("p", &["a", "b", "c"]);
        assert_eq!(b.generate("p", 2).unwrap(), vec!["a", "b"]);
    }

    #[test]
    fn scripted_json_round_trip() {
        let b = ScriptedBackend::new().with("p", &["a"]).with("q", &["b", "c"]);
        assert_eq!(ScriptedBackend::from_json(&b.to_json()).unwrap(), b);
    }

    #[test]
    fn http_backend_reads_ranked_choices() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let req: serde_json::Value = serde_json::from_slice(&body).unwrap();
            let payload = r#"{"choices":[{"text":"second","index":1},{"text":"first","index":0}]}"#;
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                payload.len(),
                payload
            )
            .unwrap();
            req
        });
        let backend = HttpBackend::new(HttpBackendConfig {
            base_url: format!("http://{addr}/v1"),
            model: "test-model".into(),
            top_p: 0.9,
            temperature: 0.5,
            max_tokens: 16,
            api_key: None,
            timeout_secs: 5,
        })
        .unwrap();
        let out = backend.generate("hello", 2).unwrap();
        assert_eq!(out, vec!["first", "second"]);
        let req = server.join().unwrap();
        assert_eq!(req["model"], "test-model");
        assert_eq!(req["n"], 2);
        assert_eq!(req["prompt"], "hello");
    }
}
