//! Reference-candidate generation through an OpenAI-compatible chat endpoint.
//!
//! One request per segment asks for all `n` candidates at once. Responses
//! are parsed as numbered lists; malformed responses are retried up to
//! `max_retries` times. Records are handed to a sink as soon as each segment
//! finishes so callers can persist them append-only and resume later.

use std::collections::{BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_PLACEHOLDER: &str = "{n}";
pub const SOURCE_PLACEHOLDER: &str = "{source}";
pub const DEFAULT_API_KEY_ENV: &str = "OPENAI_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    English,
    Chinese,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Translation,
    Summarization,
}

/// Prompt layout: rules, then the task description (with `{n}` and
/// `{source}` substituted), then optionally a labeled ground-truth block.
/// Blocks are separated by blank lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub rules: String,
    pub task_description: String,
    pub include_ground_truth: bool,
    pub language: Language,
    pub ground_truth_label: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::builtin(Task::Translation, Language::English)
    }
}

impl PromptTemplate {
    /// Built-in templates. `Language::Custom` falls back to English text.
    pub fn builtin(task: Task, language: Language) -> Self {
        let (rules, task_description, label) = match (task, language) {
            (Task::Translation, Language::Chinese) => (
                "你是一名资深翻译。译文必须忠实于原文含义，保留人名、数字和专有名词，语言自然流畅。\
                 不同译文之间请尽量变换用词和句式。只输出编号列表，每行一条译文，不要附加解释。",
                "请给出以下文本的 {n} 条不同的高质量译文：\n\n{source}",
                "参考译文：",
            ),
            (Task::Summarization, Language::Chinese) => (
                "你是一名资深编辑。摘要必须准确、简洁、连贯，不得引入原文没有的信息。\
                 不同摘要之间请尽量变换用词和句式。只输出编号列表，每行一条摘要，不要附加解释。",
                "请给出以下文章的 {n} 条不同的高质量摘要：\n\n{source}",
                "参考摘要：",
            ),
            (Task::Summarization, _) => (
                "You are an experienced editor. Every summary must be accurate, concise and coherent, \
                 and must not add facts absent from the article. Vary wording and sentence structure \
                 between summaries. Reply with a numbered list only, one summary per line, no commentary.",
                "Write {n} different high-quality summaries of the article below.\n\n{source}",
                "Reference summary:",
            ),
            (Task::Translation, _) => (
                "You are an experienced translator. Every translation must be faithful to the source, \
                 fluent, and keep names, numbers and terminology intact. Vary wording and sentence \
                 structure between translations. Reply with a numbered list only, one translation per \
                 line, no commentary.",
                "Give {n} different high-quality translations of the text below.\n\n{source}",
                "Reference translation:",
            ),
        };
        PromptTemplate {
            rules: rules.to_string(),
            task_description: task_description.to_string(),
            include_ground_truth: true,
            language,
            ground_truth_label: label.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for placeholder in [N_PLACEHOLDER, SOURCE_PLACEHOLDER] {
            let count = self.task_description.matches(placeholder).count();
            if count != 1 {
                return Err(Error::invalid(format!(
                    "task description must contain {placeholder} exactly once (found {count})"
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic prompt assembly. `ground_truth` must be given exactly when
/// the template includes a ground-truth block.
pub fn build_prompt(t: &PromptTemplate, source: &str, ground_truth: Option<&str>, n: usize) -> Result<String> {
    t.validate()?;
    if n == 0 {
        return Err(Error::invalid("number of requested references must be at least 1"));
    }
    if t.include_ground_truth != ground_truth.is_some() {
        return Err(Error::invalid(if t.include_ground_truth {
            "template includes ground truth but none was given"
        } else {
            "ground truth given but the template excludes it"
        }));
    }
    // Substitute {n} first and split around {source} so source text is inserted verbatim.
    let (before, after) = t
        .task_description
        .split_once(SOURCE_PLACEHOLDER)
        .expect("validated");
    let n_text = n.to_string();
    let mut prompt = String::new();
    if !t.rules.trim().is_empty() {
        prompt.push_str(t.rules.trim_end());
        prompt.push_str("\n\n");
    }
    prompt.push_str(&before.replace(N_PLACEHOLDER, &n_text));
    prompt.push_str(source);
    prompt.push_str(&after.replace(N_PLACEHOLDER, &n_text));
    if let Some(gt) = ground_truth {
        prompt.push_str("\n\n");
        prompt.push_str(&t.ground_truth_label);
        prompt.push('\n');
        prompt.push_str(gt);
    }
    Ok(prompt)
}

/// Splits a leading list number (`1.`, `2)`, `3、`, `4:`) from a line.
fn strip_numbering(line: &str) -> Option<&str> {
    let digits = line.len() - line.trim_start_matches(|c: char| c.is_ascii_digit()).len();
    if digits == 0 {
        return None;
    }
    let rest = &line[digits..];
    let mut chars = rest.chars();
    match chars.next() {
        Some('.' | ')' | '、' | ':' | '：' | '．') => Some(chars.as_str().trim()),
        _ => None,
    }
}

/// Extracts exactly `expected_n` candidates from a model response. Numbered
/// items are used when any line is numbered; otherwise each non-empty line
/// is one candidate.
pub fn parse_candidates(raw: &str, expected_n: usize) -> Result<Vec<String>> {
    if raw.trim().is_empty() {
        return Err(Error::MalformedResponse("empty response".into()));
    }
    let lines: Vec<&str> = raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let numbered: Vec<&str> = lines.iter().filter_map(|l| strip_numbering(l)).collect();
    let items: Vec<String> = if numbered.is_empty() {
        lines.iter().map(|l| l.to_string()).collect()
    } else {
        numbered
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect()
    };
    if items.len() != expected_n {
        return Err(Error::MalformedResponse(format!(
            "expected {expected_n} candidates, parsed {}",
            items.len()
        )));
    }
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body for `POST /v1/chat/completions`. Sampling parameters are
/// deliberately absent so the endpoint defaults apply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    pub fn user(model: impl Into<String>, prompt: impl Into<String>) -> Self {
        ChatRequest {
            model: model.into(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.into(),
            }],
        }
    }

    pub fn prompt(&self) -> &str {
        self.messages.last().map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Worth another attempt (rate limit, server error, timeout).
    Retryable(String),
    /// Aborts the whole run (authentication, unreachable endpoint).
    Fatal(String),
}

/// Chat-completion backend. Returns the first choice's message content.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError>;
}

impl<T: ChatTransport + ?Sized> ChatTransport for Box<T> {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        (**self).complete(request)
    }
}

/// `endpoint` may be a base URL (`https://host`, `https://host/v1`) or the
/// full completions URL.
pub fn completions_url(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/');
    if base.ends_with("/chat/completions") {
        base.to_string()
    } else if base.ends_with("/v1") {
        format!("{base}/chat/completions")
    } else {
        format!("{base}/v1/chat/completions")
    }
}

pub struct OpenAiTransport {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
}

impl OpenAiTransport {
    pub fn new(endpoint: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        OpenAiTransport {
            agent,
            url: completions_url(endpoint),
            api_key,
        }
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    message: ChatMessage,
}

impl ChatTransport for OpenAiTransport {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Retryable(format!("timeout: {e}")),
            other => TransportError::Fatal(format!("{}: {other}", self.url)),
        })?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportError::Retryable(format!("reading response body: {e}")))?;
        match status {
            200..=299 => {}
            401 | 403 => {
                return Err(TransportError::Fatal(format!(
                    "authentication rejected (HTTP {status}): {body}"
                )))
            }
            408 | 429 | 500..=599 => {
                return Err(TransportError::Retryable(format!("HTTP {status}: {body}")))
            }
            _ => return Err(TransportError::Fatal(format!("HTTP {status}: {body}"))),
        }
        let parsed: CompletionResponse = serde_json::from_str(&body)
            .map_err(|e| TransportError::Retryable(format!("unparseable completion: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| TransportError::Retryable("completion has no choices".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EchoMode {
    Valid,
    /// The first `failures` calls for each distinct prompt return garbage.
    FlakyThenValid { failures: usize },
    Garbage,
}

/// Offline transport that answers with `n` numbered word-order variants of
/// the last prompt block (the ground truth when present, otherwise the
/// source). Deterministic for a given prompt.
pub struct EchoTransport {
    n: usize,
    mode: EchoMode,
    calls: Mutex<HashMap<String, usize>>,
}

impl EchoTransport {
    pub fn new(n: usize, mode: EchoMode) -> Self {
        EchoTransport {
            n,
            mode,
            calls: Mutex::new(HashMap::new()),
        }
    }

    /// Parses `mock://echo`, `mock://garbage`, `mock://flaky?failures=K`.
    pub fn from_url(url: &str, n: usize) -> Result<Self> {
        let rest = url
            .strip_prefix("mock://")
            .ok_or_else(|| Error::Config(format!("not a mock endpoint: {url}")))?;
        let (kind, query) = rest.split_once('?').unwrap_or((rest, ""));
        let mode = match kind.trim_end_matches('/') {
            "" | "echo" => EchoMode::Valid,
            "garbage" => EchoMode::Garbage,
            "flaky" => {
                let failures = query
                    .split('&')
                    .find_map(|kv| kv.strip_prefix("failures="))
                    .map(|v| v.parse::<usize>())
                    .transpose()
                    .map_err(|e| Error::Config(format!("{url}: {e}")))?
                    .unwrap_or(1);
                EchoMode::FlakyThenValid { failures }
            }
            other => return Err(Error::Config(format!("unknown mock endpoint kind {other:?}"))),
        };
        Ok(EchoTransport::new(n, mode))
    }

    fn base_text(prompt: &str) -> &str {
        let last = prompt.rsplit("\n\n").next().unwrap_or(prompt);
        match last.split_once('\n') {
            Some((first, rest)) if first.trim_end().ends_with([':', '：']) => rest,
            _ => last,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

impl ChatTransport for EchoTransport {
    fn complete(&self, request: &ChatRequest) -> std::result::Result<String, TransportError> {
        let prompt = request.prompt();
        let call = {
            let mut calls = self.calls.lock().expect("mock call log poisoned");
            let c = calls.entry(prompt.to_string()).or_insert(0);
            *c += 1;
            *c
        };
        let garbage = match self.mode {
            EchoMode::Valid => false,
            EchoMode::Garbage => true,
            EchoMode::FlakyThenValid { failures } => call <= failures,
        };
        if garbage {
            return Ok("  \n".to_string());
        }
        let words: Vec<&str> = EchoTransport::base_text(prompt).split_whitespace().collect();
        let seed = fnv1a(prompt);
        let mut out = String::new();
        for i in 0..self.n {
            let mut variant = words.clone();
            let mut state = seed ^ (i as u64).wrapping_mul(0x2545_F491_4F6C_DD1D);
            for j in (1..variant.len()).rev() {
                state = splitmix64(state);
                variant.swap(j, (state % (j as u64 + 1)) as usize);
            }
            let line = if variant.is_empty() {
                format!("variant {}", i + 1)
            } else {
                variant.join(" ")
            };
            out.push_str(&format!("{}. {}\n", i + 1, line));
        }
        Ok(out)
    }
}

fn default_model() -> String {
    "gpt-3.5-turbo".into()
}
fn default_n() -> usize {
    40
}
fn default_endpoint() -> String {
    "https://api.openai.com".into()
}
fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.into()
}
fn default_retries() -> usize {
    3
}
fn default_timeout() -> u64 {
    120
}
fn default_concurrency() -> usize {
    4
}
fn default_backoff() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationConfig {
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_n")]
    pub n_references: usize,
    #[serde(default = "default_endpoint")]
    pub endpoint_url: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Maximum number of requests in flight.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Minimum spacing between request starts; 0 disables rate limiting.
    #[serde(default)]
    pub min_interval_ms: u64,
    /// Base delay before retrying a retryable transport error, doubled per attempt.
    #[serde(default = "default_backoff")]
    pub retry_backoff_ms: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            model_name: default_model(),
            n_references: default_n(),
            endpoint_url: default_endpoint(),
            api_key_env: default_api_key_env(),
            max_retries: default_retries(),
            timeout_secs: default_timeout(),
            concurrency: default_concurrency(),
            min_interval_ms: 0,
            retry_backoff_ms: default_backoff(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_references == 0 {
            return Err(Error::Config("n_references must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_mock(&self) -> bool {
        self.endpoint_url.starts_with("mock://")
    }

    /// Builds the transport for `endpoint_url`. Real endpoints require the
    /// API key variable to be set.
    pub fn transport(&self) -> Result<Box<dyn ChatTransport>> {
        if self.is_mock() {
            return Ok(Box::new(EchoTransport::from_url(&self.endpoint_url, self.n_references)?));
        }
        let key = std::env::var(&self.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| {
                Error::Config(format!(
                    "API key not found: set the {} environment variable (endpoint {})",
                    self.api_key_env, self.endpoint_url
                ))
            })?;
        Ok(Box::new(OpenAiTransport::new(
            &self.endpoint_url,
            Some(key),
            Duration::from_secs(self.timeout_secs),
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenerationStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub segment_id: String,
    pub status: GenerationStatus,
    pub prompt_used: String,
    /// Last raw response received, kept for audit.
    pub raw_response: String,
    pub candidates: Vec<String>,
    pub attempt_count: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    #[serde(default)]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GenerationRecord {
    pub fn is_ok(&self) -> bool {
        self.status == GenerationStatus::Ok
    }
}

/// Generation input for one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSegment {
    pub id: String,
    pub source: String,
    pub gold: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationSummary {
    /// Records produced by this run, in input order.
    pub records: Vec<GenerationRecord>,
    pub skipped: usize,
    pub failed: usize,
}

struct RateLimiter {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateLimiter {
    fn new(interval: Duration) -> Self {
        RateLimiter {
            interval,
            next: Mutex::new(Instant::now()),
        }
    }

    fn wait(&self) {
        if self.interval.is_zero() {
            return;
        }
        let delay = {
            let mut next = self.next.lock().expect("rate limiter poisoned");
            let now = Instant::now();
            let start = (*next).max(now);
            *next = start + self.interval;
            start - now
        };
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn generate_one(
    seg: &SourceSegment,
    template: &PromptTemplate,
    cfg: &GenerationConfig,
    transport: &dyn ChatTransport,
    limiter: &RateLimiter,
) -> Result<GenerationRecord> {
    // Ground truth goes into the prompt only when the template asks for it and the segment has one.
    let gold = seg.gold.as_deref().filter(|_| template.include_ground_truth);
    let mut t = template.clone();
    t.include_ground_truth = gold.is_some();
    let prompt = build_prompt(&t, &seg.source, gold, cfg.n_references)?;
    let request = ChatRequest::user(&cfg.model_name, prompt.clone());

    let mut raw_response = String::new();
    let mut last_error = String::new();
    let mut attempts = 0;
    while attempts <= cfg.max_retries {
        limiter.wait();
        attempts += 1;
        match transport.complete(&request) {
            Ok(raw) => match parse_candidates(&raw, cfg.n_references) {
                Ok(candidates) => {
                    return Ok(GenerationRecord {
                        segment_id: seg.id.clone(),
                        status: GenerationStatus::Ok,
                        prompt_used: prompt,
                        raw_response: raw,
                        candidates,
                        attempt_count: attempts,
                        timestamp: now_secs(),
                        model: cfg.model_name.clone(),
                        error: None,
                    });
                }
                Err(e) => {
                    raw_response = raw;
                    last_error = e.to_string();
                }
            },
            Err(TransportError::Retryable(msg)) => {
                last_error = msg;
                if attempts <= cfg.max_retries && cfg.retry_backoff_ms > 0 {
                    let factor = 1u64 << (attempts - 1).min(10);
                    std::thread::sleep(Duration::from_millis(cfg.retry_backoff_ms * factor));
                }
            }
            Err(TransportError::Fatal(msg)) => {
                return Err(Error::Transport(format!("segment {}: {msg}", seg.id)));
            }
        }
    }
    Ok(GenerationRecord {
        segment_id: seg.id.clone(),
        status: GenerationStatus::Failed,
        prompt_used: prompt,
        raw_response,
        candidates: Vec::new(),
        attempt_count: attempts,
        timestamp: now_secs(),
        model: cfg.model_name.clone(),
        error: Some(last_error),
    })
}

/// Generates candidates for every segment not in `completed`.
///
/// Each finished record is passed to `on_record` as soon as it is available
/// (from the calling thread only). A segment whose retries are exhausted
/// yields a failed record and the run continues; a fatal transport error
/// stops new requests and is returned after in-flight ones drain.
pub fn generate_references<F>(
    segments: &[SourceSegment],
    template: &PromptTemplate,
    cfg: &GenerationConfig,
    transport: &dyn ChatTransport,
    completed: &BTreeSet<String>,
    mut on_record: F,
) -> Result<GenerationSummary>
where
    F: FnMut(&GenerationRecord) -> Result<()>,
{
    cfg.validate()?;
    template.validate()?;
    if segments.is_empty() {
        return Err(Error::invalid("no segments to generate references for"));
    }
    let pending: Vec<(usize, &SourceSegment)> = segments
        .iter()
        .enumerate()
        .filter(|(_, s)| !completed.contains(&s.id))
        .collect();
    let skipped = segments.len() - pending.len();
    let limiter = RateLimiter::new(Duration::from_millis(cfg.min_interval_ms));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let workers = cfg.concurrency.min(pending.len()).max(1);

    let mut results: Vec<(usize, GenerationRecord)> = Vec::with_capacity(pending.len());
    let mut first_error: Option<Error> = None;
    std::thread::scope(|scope| {
        let (tx, rx) = mpsc::channel();
        for _ in 0..workers {
            let tx = tx.clone();
            let (pending, next, abort, limiter) = (&pending, &next, &abort, &limiter);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(index, seg)) = pending.get(i) else {
                    break;
                };
                let outcome = generate_one(seg, template, cfg, transport, limiter);
                if outcome.is_err() {
                    abort.store(true, Ordering::SeqCst);
                }
                if tx.send((index, outcome)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (index, outcome) in rx {
            match outcome {
                Ok(record) => {
                    if first_error.is_none() {
                        if let Err(e) = on_record(&record) {
                            abort.store(true, Ordering::SeqCst);
                            first_error = Some(e);
                        }
                    }
                    results.push((index, record));
                }
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
    });
    if let Some(e) = first_error {
        return Err(e);
    }
    results.sort_by_key(|(i, _)| *i);
    let records: Vec<GenerationRecord> = results.into_iter().map(|(_, r)| r).collect();
    let failed = records.iter().filter(|r| !r.is_ok()).count();
    Ok(GenerationSummary {
        records,
        skipped,
        failed,
    })
}

/// Append-only JSONL log of generation records.
pub struct RecordLog {
    path: PathBuf,
    file: File,
}

impl RecordLog {
    /// Opens (creating if needed) the log and returns it together with the
    /// ids of segments that already have a successful record.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, BTreeSet<String>)> {
        let path = path.as_ref().to_path_buf();
        let mut completed = BTreeSet::new();
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(|e| Error::io(&path, e))?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let record: GenerationRecord = serde_json::from_str(&line).map_err(|e| Error::Load {
                    path: path.clone(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                if record.is_ok() {
                    completed.insert(record.segment_id);
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        Ok((RecordLog { path, file }, completed))
    }

    /// Writes one record as a single line and flushes it.
    pub fn append(&mut self, record: &GenerationRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}
