//! Completion gateway: every model call goes through [`Gateway::complete`].
//!
//! Three modes are supported:
//!
//! - **live** sends the request over the configured [`ChatTransport`];
//! - **record** does the same and appends a [`CompletionRecord`] to a
//!   cassette file, reusing an existing entry when the fingerprint is
//!   already present;
//! - **replay** answers from cassettes only and never builds a transport.
//!
//! Cassettes are line-delimited JSON under `fixtures/cassettes/`. When
//! tracing is enabled each call is also appended to
//! `logs/interactions.jsonl`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{EngineConfig, GatewayMode};

pub const OPENAI_CHAT_URL: &str = "https://api.openai.com/v1/chat/completions";
pub const DEFAULT_CASSETTE_DIR: &str = "fixtures/cassettes";
pub const DEFAULT_LOG_PATH: &str = "logs/interactions.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
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

/// JSON schema the reply must conform to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSchema {
    pub name: String,
    pub schema: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_name: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub structured_output_schema: Option<OutputSchema>,
}

impl CompletionRequest {
    pub fn new(model_name: impl Into<String>, messages: Vec<Message>) -> Self {
        Self {
            model_name: model_name.into(),
            messages,
            temperature: 0.0,
            structured_output_schema: None,
        }
    }

    pub fn with_schema(mut self, schema: OutputSchema) -> Self {
        self.structured_output_schema = Some(schema);
        self
    }

    /// SHA-256 over the canonical JSON of model, messages and schema.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            model_name: &'a str,
            messages: &'a [Message],
            schema: Option<&'a OutputSchema>,
        }
        let key = Key {
            model_name: &self.model_name,
            messages: &self.messages,
            schema: self.structured_output_schema.as_ref(),
        };
        let value = serde_json::to_value(&key).expect("request serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical_json(&value).as_bytes());
        hex::encode(hasher.finalize())
    }

    /// Last user message, shortened, for cassette and log readability.
    pub fn summary(&self) -> String {
        let text = self
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let first_line = text.lines().next().unwrap_or("");
        let mut out: String = first_line.chars().take(100).collect();
        if out.len() < text.len() {
            out.push_str("...");
        }
        out
    }
}

/// Serializes with object keys sorted at every level.
pub fn canonical_json(value: &serde_json::Value) -> String {
    fn sort(v: &serde_json::Value) -> serde_json::Value {
        match v {
            serde_json::Value::Object(map) => {
                let sorted: BTreeMap<_, _> = map.iter().map(|(k, v)| (k.clone(), sort(v))).collect();
                serde_json::Value::Object(sorted.into_iter().collect())
            }
            serde_json::Value::Array(items) => serde_json::Value::Array(items.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    sort(value).to_string()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub total_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub request_fingerprint: String,
    pub request_summary: String,
    pub response_text: String,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportReply {
    pub text: String,
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportError {
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("network: {0}")]
    Network(String),
    #[error("unexpected response body: {0}")]
    Body(String),
}

/// Something that can carry a chat completion request to a model.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication failed (401)")]
    Auth,
    #[error("rate limited (429) after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("provider error {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("no recorded completion for fingerprint {0}")]
    ReplayMiss(String),
    #[error("cassette error: {0}")]
    Cassette(String),
    #[error("{0} mode requires a transport")]
    NoTransport(&'static str),
}

/// Capped exponential backoff on 429 responses.
#[derive(Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    sleep: Arc<dyn Fn(Duration) + Send + Sync>,
}

impl std::fmt::Debug for RetryPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RetryPolicy")
            .field("max_attempts", &self.max_attempts)
            .field("base_delay", &self.base_delay)
            .field("max_delay", &self.max_delay)
            .finish()
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
            sleep: Arc::new(std::thread::sleep),
        }
    }
}

impl RetryPolicy {
    pub fn with_sleeper(mut self, sleep: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleep = Arc::new(sleep);
        self
    }

    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 2u32.saturating_pow(retry.saturating_sub(1));
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// OpenAI-compatible chat completions over HTTPS.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

impl HttpTransport {
    pub fn new(api_key: impl Into<String>, endpoint: impl Into<String>) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| GatewayError::Network(e.to_string()))?;
        Ok(Self {
            client,
            endpoint: endpoint.into(),
            api_key: api_key.into(),
        })
    }

    pub fn wire_body(request: &CompletionRequest) -> serde_json::Value {
        let mut body = serde_json::json!({
            "model": request.model_name,
            "messages": request.messages,
            "temperature": request.temperature,
        });
        if let Some(schema) = &request.structured_output_schema {
            body["response_format"] = serde_json::json!({
                "type": "json_schema",
                "json_schema": { "name": schema.name, "schema": schema.schema, "strict": true },
            });
        }
        body
    }
}

#[derive(Deserialize)]
struct WireReply {
    choices: Vec<WireChoice>,
    usage: Option<TokenUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl ChatTransport for HttpTransport {
    fn send(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError> {
        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&Self::wire_body(request))
            .send()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response.text().map_err(|e| TransportError::Network(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        let reply: WireReply = serde_json::from_str(&text).map_err(|e| TransportError::Body(e.to_string()))?;
        let content = reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError::Body("no message content".to_string()))?;
        Ok(TransportReply { text: content, usage: reply.usage })
    }
}

struct Cassettes {
    entries: HashMap<String, CompletionRecord>,
    sink: Option<(PathBuf, File)>,
}

/// Loads every `*.jsonl` file in `dir`. Later entries never replace earlier
/// ones for the same fingerprint.
pub fn load_cassettes(dir: &Path) -> Result<HashMap<String, CompletionRecord>, GatewayError> {
    let mut entries = HashMap::new();
    if !dir.exists() {
        return Ok(entries);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| GatewayError::Cassette(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    for path in files {
        let file = File::open(&path).map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CompletionRecord = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Cassette(format!("{}:{}: {e}", path.display(), n + 1)))?;
            entries.entry(record.request_fingerprint.clone()).or_insert(record);
        }
    }
    Ok(entries)
}

#[derive(Serialize)]
struct LogEntry<'a> {
    timestamp: String,
    project: &'a str,
    mode: GatewayMode,
    model: &'a str,
    fingerprint: &'a str,
    source: &'a str,
    latency_ms: u128,
    messages: &'a [Message],
    #[serde(skip_serializing_if = "Option::is_none")]
    response_text: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    token_usage: Option<TokenUsage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct InteractionLog {
    project: String,
    file: Mutex<File>,
}

pub struct Gateway {
    mode: GatewayMode,
    transport: Option<Box<dyn ChatTransport>>,
    cassettes: Mutex<Cassettes>,
    log: Option<InteractionLog>,
    retry: RetryPolicy,
    network_calls: AtomicUsize,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("has_transport", &self.transport.is_some())
            .field("network_calls", &self.network_calls())
            .finish()
    }
}

impl Gateway {
    /// Answers only from the cassettes in `dir`.
    pub fn replay(dir: &Path) -> Result<Self, GatewayError> {
        let entries = load_cassettes(dir)?;
        Ok(Self::assemble(GatewayMode::Replay, None, entries, None))
    }

    pub fn live(transport: Box<dyn ChatTransport>) -> Self {
        Self::assemble(GatewayMode::Live, Some(transport), HashMap::new(), None)
    }

    /// Calls `transport` for unseen requests and appends them to
    /// `dir/<file_name>`.
    pub fn record(transport: Box<dyn ChatTransport>, dir: &Path, file_name: &str) -> Result<Self, GatewayError> {
        let entries = load_cassettes(dir)?;
        fs::create_dir_all(dir).map_err(|e| GatewayError::Cassette(format!("{}: {e}", dir.display())))?;
        let path = dir.join(file_name);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        Ok(Self::assemble(GatewayMode::Record, Some(transport), entries, Some((path, file))))
    }

    /// Builds the gateway the configuration asks for, talking to the
    /// OpenAI endpoint in live and record modes.
    pub fn from_config(config: &EngineConfig, cassette_dir: &Path) -> Result<Self, GatewayError> {
        let http = || -> Result<Box<dyn ChatTransport>, GatewayError> {
            let key = config
                .openai_api_key
                .as_ref()
                .ok_or(GatewayError::NoTransport(config.gateway_mode.as_str()))?;
            Ok(Box::new(HttpTransport::new(key.expose(), OPENAI_CHAT_URL)?))
        };
        let gateway = match config.gateway_mode {
            GatewayMode::Replay => Self::replay(cassette_dir)?,
            GatewayMode::Live => Self::live(http()?),
            GatewayMode::Record => Self::record(http()?, cassette_dir, "recorded.jsonl")?,
        };
        if config.tracing_enabled {
            gateway.with_interaction_log(Path::new(DEFAULT_LOG_PATH), &config.tracing_project)
        } else {
            Ok(gateway)
        }
    }

    fn assemble(
        mode: GatewayMode,
        transport: Option<Box<dyn ChatTransport>>,
        entries: HashMap<String, CompletionRecord>,
        sink: Option<(PathBuf, File)>,
    ) -> Self {
        Self {
            mode,
            transport,
            cassettes: Mutex::new(Cassettes { entries, sink }),
            log: None,
            retry: RetryPolicy::default(),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_interaction_log(mut self, path: &Path, project: &str) -> Result<Self, GatewayError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| GatewayError::Cassette(format!("{}: {e}", parent.display())))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        self.log = Some(InteractionLog {
            project: project.to_string(),
            file: Mutex::new(file),
        });
        Ok(self)
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    /// Requests that actually went out over the transport.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn has_transport(&self) -> bool {
        self.transport.is_some()
    }

    pub fn cassette_len(&self) -> usize {
        self.cassettes.lock().expect("cassette lock").entries.len()
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<String, GatewayError> {
        let started = Instant::now();
        let fingerprint = request.fingerprint();
        let (result, source, usage) = self.dispatch(request, &fingerprint);
        self.log_call(request, &fingerprint, source, started, &result, usage);
        result
    }

    fn lookup(&self, fingerprint: &str) -> Option<CompletionRecord> {
        self.cassettes.lock().expect("cassette lock").entries.get(fingerprint).cloned()
    }

    fn dispatch(
        &self,
        request: &CompletionRequest,
        fingerprint: &str,
    ) -> (Result<String, GatewayError>, &'static str, Option<TokenUsage>) {
        match self.mode {
            GatewayMode::Replay => match self.lookup(fingerprint) {
                Some(rec) => (Ok(rec.response_text), "cassette", rec.token_usage),
                None => (Err(GatewayError::ReplayMiss(fingerprint.to_string())), "cassette", None),
            },
            GatewayMode::Live => match self.send_with_retry(request) {
                Ok(reply) => (Ok(reply.text), "network", reply.usage),
                Err(e) => (Err(e), "network", None),
            },
            GatewayMode::Record => {
                if let Some(rec) = self.lookup(fingerprint) {
                    return (Ok(rec.response_text), "cassette", rec.token_usage);
                }
                let reply = match self.send_with_retry(request) {
                    Ok(reply) => reply,
                    Err(e) => return (Err(e), "network", None),
                };
                let record = CompletionRecord {
                    request_fingerprint: fingerprint.to_string(),
                    request_summary: request.summary(),
                    response_text: reply.text.clone(),
                    timestamp: chrono::Utc::now().to_rfc3339(),
                    token_usage: reply.usage,
                };
                match self.append(record) {
                    Ok(text) => (Ok(text), "network", reply.usage),
                    Err(e) => (Err(e), "network", reply.usage),
                }
            }
        }
    }

    /// Appends unless a concurrent caller recorded the same fingerprint
    /// first, in which case that entry wins.
    fn append(&self, record: CompletionRecord) -> Result<String, GatewayError> {
        let mut guard = self.cassettes.lock().expect("cassette lock");
        if let Some(existing) = guard.entries.get(&record.request_fingerprint) {
            return Ok(existing.response_text.clone());
        }
        if let Some((path, file)) = guard.sink.as_mut() {
            let line = serde_json::to_string(&record).map_err(|e| GatewayError::Cassette(e.to_string()))?;
            writeln!(file, "{line}")
                .and_then(|_| file.flush())
                .map_err(|e| GatewayError::Cassette(format!("{}: {e}", path.display())))?;
        }
        let text = record.response_text.clone();
        guard.entries.insert(record.request_fingerprint.clone(), record);
        Ok(text)
    }

    fn send_with_retry(&self, request: &CompletionRequest) -> Result<TransportReply, GatewayError> {
        let transport = self
            .transport
            .as_ref()
            .ok_or(GatewayError::NoTransport(self.mode.as_str()))?;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.network_calls.fetch_add(1, Ordering::SeqCst);
            match transport.send(request) {
                Ok(reply) => return Ok(reply),
                Err(TransportError::Status { status: 429, .. }) => {
                    if attempt >= self.retry.max_attempts {
                        return Err(GatewayError::RateLimited { attempts: attempt });
                    }
                    (self.retry.sleep)(self.retry.delay(attempt));
                }
                Err(TransportError::Status { status: 401, .. }) => return Err(GatewayError::Auth),
                Err(TransportError::Status { status, body }) => return Err(GatewayError::Provider { status, body }),
                Err(TransportError::Network(e)) => return Err(GatewayError::Network(e)),
                Err(TransportError::Body(e)) => {
                    return Err(GatewayError::Provider { status: 200, body: e })
                }
            }
        }
    }

    fn log_call(
        &self,
        request: &CompletionRequest,
        fingerprint: &str,
        source: &str,
        started: Instant,
        result: &Result<String, GatewayError>,
        usage: Option<TokenUsage>,
    ) {
        let Some(log) = &self.log else { return };
        let entry = LogEntry {
            timestamp: chrono::Utc::now().to_rfc3339(),
            project: &log.project,
            mode: self.mode,
            model: &request.model_name,
            fingerprint,
            source,
            latency_ms: started.elapsed().as_millis(),
            messages: &request.messages,
            response_text: result.as_ref().ok().map(String::as_str),
            token_usage: usage,
            error: result.as_ref().err().map(|e| e.to_string()),
        };
        if let Ok(line) = serde_json::to_string(&entry) {
            let mut file = log.file.lock().expect("log lock");
            // Logging must never fail a completion.
            let _ = writeln!(file, "{line}");
        }
    }
}
