//! Runs prompt suites against model backends and journals every response.

pub mod chat;
pub mod journal;
pub mod mock;

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::generator::{Mode, PromptInstance};
use crate::scoring::extract_answer;
use crate::world::ExpectedLabel;
use crate::Result;

pub use chat::ChatBackend;
pub use journal::{read_journal, JournalWriter};
pub use mock::{MockAgent, MockBackend};

pub const DEFAULT_ENDPOINT: &str = "https://openrouter.ai/api/v1/chat/completions";
pub const DEFAULT_CREDENTIAL_ENV: &str = "ABSURD_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    Cheap,
    Expensive,
    Reasoning,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Cheap, Category::Expensive, Category::Reasoning];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Cheap => "CHEAP",
            Category::Expensive => "EXPENSIVE",
            Category::Reasoning => "REASONING",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RequestOptions {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub logprobs: bool,
    pub top_logprobs: u32,
}

impl Default for RequestOptions {
    fn default() -> Self {
        RequestOptions {
            temperature: 0.0,
            max_tokens: None,
            logprobs: false,
            top_logprobs: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model_id: String,
    pub category: Category,
    #[serde(default = "default_endpoint")]
    pub endpoint_url: String,
    #[serde(default)]
    pub request_options: RequestOptions,
}

fn default_endpoint() -> String {
    DEFAULT_ENDPOINT.to_string()
}

impl ModelSpec {
    pub fn new(model_id: &str, category: Category) -> Self {
        ModelSpec {
            model_id: model_id.to_string(),
            category,
            endpoint_url: default_endpoint(),
            request_options: RequestOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAlternative {
    pub token: String,
    pub logprob: f64,
}

/// One model response to one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance_id: String,
    pub model_id: String,
    pub mode: Mode,
    pub ruleset_name: String,
    pub raw_text: String,
    /// Per generated token, the returned alternatives. Absent when the
    /// provider sent no logprobs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<Vec<TokenAlternative>>>,
    pub extracted: Option<ExpectedLabel>,
    pub correct: Option<bool>,
    pub latency_ms: u64,
    pub attempt_count: u32,
    /// Unix time in milliseconds.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub max_parallel_requests: usize,
    pub retry_limit: u32,
    /// Delay before retry k is `backoff_ms[min(k, len - 1)]`.
    pub backoff_ms: Vec<u64>,
    pub timeout_ms: u64,
    pub credential_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            max_parallel_requests: 4,
            retry_limit: 3,
            backoff_ms: vec![500, 1_000, 2_000, 4_000],
            timeout_ms: 120_000,
            credential_env: DEFAULT_CREDENTIAL_ENV.to_string(),
        }
    }
}

impl BackendConfig {
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = match self.backoff_ms.len() {
            0 => 0,
            len => self.backoff_ms[(retry as usize).min(len - 1)],
        };
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub token_logprobs: Option<Vec<Vec<TokenAlternative>>>,
}

impl Completion {
    pub fn text(text: impl Into<String>) -> Self {
        Completion {
            text: text.into(),
            token_logprobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::RateLimited(_) | BackendError::Timeout(_) | BackendError::Transport(_) => {
                true
            }
            BackendError::Http { status, .. } => *status >= 500,
            BackendError::Auth(_) | BackendError::Malformed(_) => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, model: &ModelSpec, prompt: &PromptInstance)
        -> Result<Completion, BackendError>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    /// prompts × models
    pub pairs: usize,
    /// already journaled before this run
    pub skipped: usize,
    pub written: usize,
    /// written with an empty response after retries ran out
    pub failed: usize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Calls the backend with retries and turns the outcome into a graded record.
pub fn evaluate_one(
    backend: &dyn Backend,
    model: &ModelSpec,
    prompt: &PromptInstance,
    config: &BackendConfig,
) -> RunRecord {
    let started = Instant::now();
    let mut attempts = 0u32;
    let mut completion = None;
    loop {
        attempts += 1;
        match backend.complete(model, prompt) {
            Ok(c) => {
                completion = Some(c);
                break;
            }
            Err(e) => {
                log::warn!(
                    "{} on {} (attempt {attempts}): {e}",
                    model.model_id,
                    prompt.instance_id
                );
                if !e.is_retryable() || attempts > config.retry_limit {
                    break;
                }
                std::thread::sleep(config.backoff(attempts - 1));
            }
        }
    }
    let (raw_text, token_logprobs) = match completion {
        Some(c) => (c.text, c.token_logprobs),
        None => (String::new(), None),
    };
    let extracted = if raw_text.is_empty() {
        None
    } else {
        extract_answer(&raw_text, &prompt.binding)
    };
    RunRecord {
        instance_id: prompt.instance_id.clone(),
        model_id: model.model_id.clone(),
        mode: prompt.mode,
        ruleset_name: prompt.ruleset_name.clone(),
        raw_text,
        token_logprobs,
        correct: extracted.map(|l| l == prompt.expected),
        extracted,
        latency_ms: started.elapsed().as_millis() as u64,
        attempt_count: attempts,
        timestamp: now_ms(),
    }
}

/// Evaluates every (prompt, model) pair not yet in the journal, with at most
/// `config.max_parallel_requests` calls in flight. Records are appended by
/// this thread only.
pub fn run_suite(
    prompts: &[PromptInstance],
    models: &[ModelSpec],
    config: &BackendConfig,
    journal_path: &Path,
    backend: &dyn Backend,
) -> Result<SuiteSummary> {
    let existing = read_journal(journal_path)?;
    let done: HashSet<(String, String)> = journal::pair_set(journal_path, &existing)?;

    let mut summary = SuiteSummary {
        pairs: prompts.len() * models.len(),
        ..SuiteSummary::default()
    };
    let mut queue = VecDeque::new();
    let mut queued = HashSet::new();
    for p in prompts {
        for m in models {
            let key = (p.instance_id.clone(), m.model_id.clone());
            if done.contains(&key) {
                summary.skipped += 1;
            } else if queued.insert(key) {
                queue.push_back((p, m));
            }
        }
    }
    if queue.is_empty() {
        return Ok(summary);
    }

    let mut writer = JournalWriter::open(journal_path)?;
    let workers = config.max_parallel_requests.max(1).min(queue.len());
    let queue = Mutex::new(queue);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<RunRecord>();

    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..workers {
            let tx = tx.clone();
            let queue = &queue;
            let abort = &abort;
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let job = queue.lock().expect("queue lock").pop_front();
                let Some((prompt, model)) = job else { break };
                let record = evaluate_one(backend, model, prompt, config);
                if tx.send(record).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            if let Err(e) = writer.append(&record) {
                abort.store(true, Ordering::Relaxed);
                return Err(e);
            }
            summary.written += 1;
            if record.raw_text.is_empty() {
                summary.failed += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::generate_batch;
    use crate::world::{builtin_soccer_world, ruleset_registry, SOCCER_WORLD};
    use std::sync::atomic::AtomicUsize;

    fn prompts(n: usize) -> Vec<PromptInstance> {
        let v = ruleset_registry(SOCCER_WORLD).unwrap().remove(0);
        generate_batch(&builtin_soccer_world(), &v, n, 1).unwrap()
    }

    fn fast_config() -> BackendConfig {
        BackendConfig {
            backoff_ms: vec![0],
            ..BackendConfig::default()
        }
    }

    struct AlwaysTimeout;
    impl Backend for AlwaysTimeout {
        fn complete(&self, _: &ModelSpec, _: &PromptInstance) -> Result<Completion, BackendError> {
            Err(BackendError::Timeout("simulated".into()))
        }
    }

    struct Gauge {
        live: AtomicUsize,
        peak: AtomicUsize,
    }
    impl Backend for Gauge {
        fn complete(&self, _: &ModelSpec, p: &PromptInstance) -> Result<Completion, BackendError> {
            let now = self.live.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(2));
            self.live.fetch_sub(1, Ordering::SeqCst);
            Ok(Completion::text(p.expected_answer()))
        }
    }

    #[test]
    fn cardinality_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let ps = prompts(100);
        let models = vec![
            ModelSpec::new("a", Category::Cheap),
            ModelSpec::new("b", Category::Expensive),
        ];
        let backend = MockBackend::new(MockAgent::RuleFollower { error_rate: 0.0 });
        let s = run_suite(&ps, &models, &fast_config(), &path, &backend).unwrap();
        assert_eq!((s.pairs, s.written, s.skipped), (200, 200, 0));
        assert_eq!(read_journal(&path).unwrap().len(), 200);

        let s = run_suite(&ps, &models, &fast_config(), &path, &backend).unwrap();
        assert_eq!((s.written, s.skipped), (0, 200));
        assert_eq!(read_journal(&path).unwrap().len(), 200);
    }

    #[test]
    fn timeouts_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let cfg = fast_config();
        let s = run_suite(
            &prompts(100),
            &[ModelSpec::new("slow", Category::Cheap)],
            &cfg,
            &path,
            &AlwaysTimeout,
        )
        .unwrap();
        assert_eq!((s.written, s.failed), (100, 100));
        for r in read_journal(&path).unwrap() {
            assert!(r.raw_text.is_empty());
            assert_eq!(r.attempt_count, cfg.retry_limit + 1);
            assert_eq!((r.extracted, r.correct), (None, None));
        }
    }

    #[test]
    fn auth_errors_are_not_retried() {
        struct Denied;
        impl Backend for Denied {
            fn complete(&self, _: &ModelSpec, _: &PromptInstance) -> Result<Completion, BackendError> {
                Err(BackendError::Auth("no".into()))
            }
        }
        let r = evaluate_one(
            &Denied,
            &ModelSpec::new("m", Category::Cheap),
            &prompts(1)[0],
            &fast_config(),
        );
        assert_eq!(r.attempt_count, 1);
    }

    #[test]
    fn parallelism_is_bounded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        let gauge = Gauge {
            live: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        };
        let cfg = BackendConfig {
            max_parallel_requests: 3,
            ..fast_config()
        };
        run_suite(
            &prompts(60),
            &[ModelSpec::new("m", Category::Cheap)],
            &cfg,
            &path,
            &gauge,
        )
        .unwrap();
        let peak = gauge.peak.load(Ordering::SeqCst);
        assert!((1..=3).contains(&peak), "peak {peak}");
    }

    #[test]
    fn backoff_schedule_saturates() {
        let cfg = BackendConfig {
            backoff_ms: vec![10, 20],
            ..BackendConfig::default()
        };
        assert_eq!(cfg.backoff(0), Duration::from_millis(10));
        assert_eq!(cfg.backoff(1), Duration::from_millis(20));
        assert_eq!(cfg.backoff(7), Duration::from_millis(20));
    }
}
