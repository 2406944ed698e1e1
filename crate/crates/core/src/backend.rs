//! Completion backends: remote chat-completion endpoints and scripted
//! test doubles behind one trait.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub max_tokens: u32,
    pub temperature: f64,
    pub model_name: String,
}

impl CompletionRequest {
    pub fn with_defaults(messages: Vec<ChatMessage>, defaults: &RequestDefaults) -> Self {
        Self {
            messages,
            max_tokens: defaults.max_tokens,
            temperature: defaults.temperature,
            model_name: defaults.model.clone(),
        }
    }

    fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }

    fn last_user_message(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    /// Seconds.
    pub inference_duration: f64,
    pub completion_tokens: Option<u64>,
    pub backend_id: String,
}

/// Generation speed, when both token count and duration are known.
pub fn tokens_per_second(resp: &CompletionResponse) -> Option<f64> {
    match resp.completion_tokens {
        Some(tokens) if resp.inference_duration > 0.0 => Some(tokens as f64 / resp.inference_duration),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("malformed endpoint URL {url:?}: {reason}")]
    MalformedUrl { url: String, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("request timed out after {0:?}")]
    Timeout(Duration),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response body: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestDefaults {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
}

fn default_model() -> String {
    "default".to_string()
}

fn default_max_tokens() -> u32 {
    512
}

impl Default for RequestDefaults {
    fn default() -> Self {
        Self { model: default_model(), max_tokens: default_max_tokens(), temperature: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Endpoint,
    Scripted,
}

/// Backend configuration file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<ScriptTable>,
    #[serde(default)]
    pub defaults: RequestDefaults,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    /// Retry a failed endpoint call once.
    #[serde(default = "default_retry")]
    pub retry: bool,
}

fn default_timeout_s() -> f64 {
    120.0
}

fn default_retry() -> bool {
    true
}

impl BackendConfig {
    pub fn scripted(script: ScriptTable) -> Self {
        Self {
            kind: BackendKind::Scripted,
            id: None,
            endpoint_url: None,
            api_key_env: None,
            script: Some(script),
            defaults: RequestDefaults::default(),
            timeout_s: default_timeout_s(),
            retry: default_retry(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BackendError> {
        serde_json::from_str(text).map_err(|e| BackendError::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Matcher {
    /// Substring of the last user message.
    Contains(String),
    /// Regex over the last user message; captures feed `$1`-style templates.
    Regex(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptRule {
    pub matcher: Matcher,
    pub response: String,
    /// Feedback mentions of `mention` required before this rule fires.
    #[serde(default)]
    pub unlock_after: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mention: Option<String>,
}

/// Marker after which a user message carries feedback/hint text. Mentions
/// are only counted in that region.
pub const DEFAULT_FEEDBACK_MARKER: &str = "## Hints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptTable {
    pub rules: Vec<ScriptRule>,
    pub fallback: String,
    #[serde(default)]
    pub synthetic_latency_s: f64,
    #[serde(default = "default_marker")]
    pub feedback_marker: String,
}

fn default_marker() -> String {
    DEFAULT_FEEDBACK_MARKER.to_string()
}

impl ScriptTable {
    pub fn new(rules: Vec<ScriptRule>, fallback: impl Into<String>, synthetic_latency_s: f64) -> Self {
        Self { rules, fallback: fallback.into(), synthetic_latency_s, feedback_marker: default_marker() }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendStats {
    pub calls: u64,
    pub failures: u64,
}

#[derive(Debug, Default)]
struct Counters {
    calls: AtomicU64,
    failures: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> BackendStats {
        BackendStats {
            calls: self.calls.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
        }
    }
}

pub trait Backend: Send + Sync {
    fn id(&self) -> &str;

    fn defaults(&self) -> &RequestDefaults;

    /// Runs one completion. Never mutates `req`.
    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError>;

    fn stats(&self) -> BackendStats;
}

/// Builds a backend. Performs no network activity.
pub fn make_backend(cfg: &BackendConfig) -> Result<Box<dyn Backend>, BackendError> {
    match cfg.kind {
        BackendKind::Scripted => {
            let script = cfg
                .script
                .clone()
                .ok_or_else(|| BackendError::Config("scripted backend requires `script`".into()))?;
            let id = cfg.id.clone().unwrap_or_else(|| "scripted".to_string());
            Ok(Box::new(ScriptedBackend::new(id, script, cfg.defaults.clone())?))
        }
        BackendKind::Endpoint => Ok(Box::new(EndpointBackend::new(cfg)?)),
    }
}

struct CompiledRule {
    rule: ScriptRule,
    regex: Option<Regex>,
}

/// Deterministic rule-table backend. Rules are tried in order; a rule fires
/// when its matcher matches the last user message and its mention counter
/// has reached `unlock_after`. Otherwise the fallback text is returned.
pub struct ScriptedBackend {
    id: String,
    defaults: RequestDefaults,
    rules: Vec<CompiledRule>,
    fallback: String,
    latency: f64,
    marker: String,
    mentions: Mutex<Vec<u32>>,
    counters: Counters,
}

impl ScriptedBackend {
    pub fn new(id: impl Into<String>, script: ScriptTable, defaults: RequestDefaults) -> Result<Self, BackendError> {
        if !(script.synthetic_latency_s >= 0.0 && script.synthetic_latency_s.is_finite()) {
            return Err(BackendError::Config("synthetic_latency_s must be >= 0".into()));
        }
        let mut rules = Vec::with_capacity(script.rules.len());
        for (i, rule) in script.rules.into_iter().enumerate() {
            if rule.unlock_after > 0 && rule.mention.is_none() {
                return Err(BackendError::Config(format!("rule {i}: unlock_after needs a `mention` key")));
            }
            let regex = match &rule.matcher {
                Matcher::Regex(pattern) => Some(
                    Regex::new(pattern).map_err(|e| BackendError::Config(format!("rule {i}: {e}")))?,
                ),
                Matcher::Contains(_) => None,
            };
            rules.push(CompiledRule { rule, regex });
        }
        let n = rules.len();
        Ok(Self {
            id: id.into(),
            defaults,
            rules,
            fallback: script.fallback,
            latency: script.synthetic_latency_s,
            marker: script.feedback_marker,
            mentions: Mutex::new(vec![0; n]),
            counters: Counters::default(),
        })
    }

    /// Current mention counters, one per rule.
    pub fn mention_counts(&self) -> Vec<u32> {
        self.mentions.lock().expect("mention lock").clone()
    }

    fn respond(&self, message: &str) -> String {
        let feedback = message.find(&self.marker).map(|at| &message[at + self.marker.len()..]);
        let mut mentions = self.mentions.lock().expect("mention lock");
        if let Some(region) = feedback {
            for (count, compiled) in mentions.iter_mut().zip(&self.rules) {
                if let Some(key) = &compiled.rule.mention {
                    if region.contains(key.as_str()) {
                        *count += 1;
                    }
                }
            }
        }
        for (compiled, &count) in self.rules.iter().zip(mentions.iter()) {
            if count < compiled.rule.unlock_after {
                continue;
            }
            match (&compiled.rule.matcher, &compiled.regex) {
                (Matcher::Contains(needle), _) if message.contains(needle.as_str()) => {
                    return compiled.rule.response.clone();
                }
                (Matcher::Regex(_), Some(re)) => {
                    if let Some(caps) = re.captures(message) {
                        let mut out = String::new();
                        caps.expand(&compiled.rule.response, &mut out);
                        return out;
                    }
                }
                _ => {}
            }
        }
        self.fallback.clone()
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn defaults(&self) -> &RequestDefaults {
        &self.defaults
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.counters.calls.fetch_add(1, Ordering::Relaxed);
        req.validate()?;
        let text = self.respond(req.last_user_message());
        Ok(CompletionResponse {
            text,
            inference_duration: self.latency,
            completion_tokens: None,
            backend_id: self.id.clone(),
        })
    }

    fn stats(&self) -> BackendStats {
        self.counters.snapshot()
    }
}

/// Chat-completion endpoint client (`choices[0].message.content`).
pub struct EndpointBackend {
    id: String,
    url: String,
    api_key: Option<String>,
    defaults: RequestDefaults,
    timeout: Duration,
    retry: bool,
    agent: ureq::Agent,
    counters: Counters,
}

impl EndpointBackend {
    pub fn new(cfg: &BackendConfig) -> Result<Self, BackendError> {
        let raw = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| BackendError::Config("endpoint backend requires `endpoint_url`".into()))?;
        let parsed = url::Url::parse(&raw)
            .map_err(|e| BackendError::MalformedUrl { url: raw.clone(), reason: e.to_string() })?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(BackendError::MalformedUrl { url: raw, reason: "scheme must be http or https".into() });
        }
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| BackendError::MissingApiKey(var.clone()))?),
            None => None,
        };
        if !(cfg.timeout_s > 0.0 && cfg.timeout_s.is_finite()) {
            return Err(BackendError::Config("timeout_s must be positive".into()));
        }
        let timeout = Duration::from_secs_f64(cfg.timeout_s);
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            id: cfg.id.clone().unwrap_or_else(|| parsed.host_str().unwrap_or("endpoint").to_string()),
            url: raw,
            api_key,
            defaults: cfg.defaults.clone(),
            timeout,
            retry: cfg.retry,
            agent,
            counters: Counters::default(),
        })
    }

    fn call_once(&self, body: &Value) -> Result<(String, Option<u64>), BackendError> {
        let mut request = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send(body.to_string()).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout(self.timeout),
            other => BackendError::Transport(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            let body: String = text.chars().take(400).collect();
            return Err(BackendError::Status { status, body });
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::BadResponse("missing choices[0].message.content".into()))?;
        let tokens = value.pointer("/usage/completion_tokens").and_then(Value::as_u64);
        Ok((content.to_string(), tokens))
    }
}

impl Backend for EndpointBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn defaults(&self) -> &RequestDefaults {
        &self.defaults
    }

    fn complete(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        self.counters.calls.fetch_add(1, Ordering::Relaxed);
        req.validate()?;
        let body = json!({
            "model": req.model_name,
            "messages": req.messages,
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        let started = Instant::now();
        let mut result = self.call_once(&body);
        if result.is_err() && self.retry {
            result = self.call_once(&body);
        }
        let inference_duration = started.elapsed().as_secs_f64();
        match result {
            Ok((text, completion_tokens)) => Ok(CompletionResponse {
                text,
                inference_duration,
                completion_tokens,
                backend_id: self.id.clone(),
            }),
            Err(e) => {
                self.counters.failures.fetch_add(1, Ordering::Relaxed);
                Err(e)
            }
        }
    }

    fn stats(&self) -> BackendStats {
        self.counters.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(user: &str) -> CompletionRequest {
        CompletionRequest::with_defaults(
            vec![ChatMessage::system("sys"), ChatMessage::user(user)],
            &RequestDefaults::default(),
        )
    }

    fn rule(needle: &str, response: &str) -> ScriptRule {
        ScriptRule {
            matcher: Matcher::Contains(needle.into()),
            response: response.into(),
            unlock_after: 0,
            mention: None,
        }
    }

    #[test]
    fn scripted_rule_and_fallback() {
        let answer = r#"{"explanation":"","positions":[[3.5,7.0]]}"#;
        let script = ScriptTable::new(vec![rule("pharmacy", answer)], "fallback", 0.25);
        let backend = make_backend(&BackendConfig::scripted(script)).unwrap();
        let resp = backend.complete(&req("go to the pharmacy")).unwrap();
        assert_eq!(resp.text, answer);
        assert_eq!(resp.inference_duration, 0.25);
        assert_eq!(backend.complete(&req("go to the lobby")).unwrap().text, "fallback");
        assert_eq!(backend.stats().calls, 2);
    }

    #[test]
    fn unlock_counts_mentions_after_marker_only() {
        let mut r = rule("lobby", "unlocked");
        r.unlock_after = 1;
        r.mention = Some("task-7".into());
        let backend =
            ScriptedBackend::new("s", ScriptTable::new(vec![r], "locked", 0.0), RequestDefaults::default())
                .unwrap();
        // mention before the marker does not count
        assert_eq!(backend.complete(&req("task-7: go to the lobby\n## Hints\n(none)")).unwrap().text, "locked");
        assert_eq!(backend.mention_counts(), vec![0]);
        assert_eq!(backend.complete(&req("go to the lobby\n## Hints\n- task-7 failed")).unwrap().text, "unlocked");
        // stays unlocked
        assert_eq!(backend.complete(&req("go to the lobby")).unwrap().text, "unlocked");
    }

    #[test]
    fn regex_templates_expand_captures() {
        let r = ScriptRule {
            matcher: Matcher::Regex(r"task (\S+) \| outcome FAILED".into()),
            response: r#"{"hints":["retry $1"]}"#.into(),
            unlock_after: 0,
            mention: None,
        };
        let backend =
            ScriptedBackend::new("t", ScriptTable::new(vec![r], "{}", 0.0), RequestDefaults::default()).unwrap();
        let text = backend.complete(&req("- iteration 1 | task t9 | outcome FAILED")).unwrap().text;
        assert_eq!(text, r#"{"hints":["retry t9"]}"#);
    }

    #[test]
    fn identical_sequences_give_identical_responses() {
        let mut r = rule("x", "yes");
        r.unlock_after = 2;
        r.mention = Some("x".into());
        let script = ScriptTable::new(vec![r], "no", 0.0);
        let inputs = ["x", "x\n## Hints x", "x", "x\n## Hints x", "x"];
        let run = || {
            let b = ScriptedBackend::new("s", script.clone(), RequestDefaults::default()).unwrap();
            inputs.iter().map(|i| b.complete(&req(i)).unwrap().text).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
        assert_eq!(run(), vec!["no", "no", "no", "yes", "yes"]);
    }

    #[test]
    fn config_errors() {
        let cfg = BackendConfig::from_json(
            r#"{"kind":"endpoint","endpoint_url":"http://localhost:1/v1","api_key_env":"NAVHARNESS_SURELY_UNSET_VAR"}"#,
        )
        .unwrap();
        assert!(matches!(make_backend(&cfg), Err(BackendError::MissingApiKey(_))));

        let cfg = BackendConfig::from_json(r#"{"kind":"endpoint","endpoint_url":"localhost:8080/v1"}"#).unwrap();
        assert!(matches!(make_backend(&cfg), Err(BackendError::MalformedUrl { .. })));

        let cfg = BackendConfig::from_json(r#"{"kind":"endpoint","endpoint_url":"no scheme"}"#).unwrap();
        assert!(matches!(make_backend(&cfg), Err(BackendError::MalformedUrl { .. })));

        let cfg = BackendConfig::from_json(r#"{"kind":"scripted"}"#).unwrap();
        assert!(matches!(make_backend(&cfg), Err(BackendError::Config(_))));

        // fallback is mandatory
        assert!(BackendConfig::from_json(r#"{"kind":"scripted","script":{"rules":[]}}"#).is_err());
    }

    #[test]
    fn request_validation() {
        let backend = make_backend(&BackendConfig::scripted(ScriptTable::new(vec![], "f", 0.0))).unwrap();
        let mut empty = req("x");
        empty.messages.clear();
        assert!(matches!(backend.complete(&empty), Err(BackendError::InvalidRequest(_))));
        let mut zero = req("x");
        zero.max_tokens = 0;
        assert!(matches!(backend.complete(&zero), Err(BackendError::InvalidRequest(_))));
    }

    #[test]
    fn tokens_per_second_cases() {
        let mut resp = CompletionResponse {
            text: String::new(),
            inference_duration: 8.0,
            completion_tokens: Some(100),
            backend_id: "b".into(),
        };
        assert_eq!(tokens_per_second(&resp), Some(12.5));
        resp.completion_tokens = Some(169);
        resp.inference_duration = 10.0;
        assert_eq!(tokens_per_second(&resp), Some(16.9));
        resp.completion_tokens = None;
        assert_eq!(tokens_per_second(&resp), None);
    }
}
