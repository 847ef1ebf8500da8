use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::adapters::{AdapterError, SentimentAdapter};
use super::vector::{ModelId, SentimentVector, WarningCounter};
use crate::fsutil::{read_jsonl, write_jsonl};
use crate::ingestion::Article;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    /// Retries after a transient adapter error.
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub max_in_flight: usize,
    /// Token-bucket refill rate; `None` disables rate limiting.
    pub requests_per_second: Option<f64>,
    /// Reply cache (line-delimited JSON); `None` disables caching.
    pub cache_path: Option<PathBuf>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            max_retries: 3,
            retry_backoff_ms: 250,
            max_in_flight: 4,
            requests_per_second: None,
            cache_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionFailure {
    pub article_id: String,
    pub model_id: ModelId,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct ExtractionOutcome {
    /// Vectors in input article order, failed articles omitted.
    pub vectors: Vec<SentimentVector>,
    pub failures: Vec<ExtractionFailure>,
    pub adapter_calls: usize,
    pub cache_hits: usize,
    pub coerced_nulls: u64,
    pub clamped: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheRecord {
    article_id: String,
    model_id: ModelId,
    request_key: String,
    vector: SentimentVector,
}

/// Token bucket holding at most one second's worth of requests.
pub struct RateLimiter {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> Self {
        let cap = requests_per_second.max(1.0);
        RateLimiter {
            rate: requests_per_second,
            state: Mutex::new((cap, Instant::now())),
        }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().expect("rate limiter lock");
                let now = Instant::now();
                let cap = self.rate.max(1.0);
                st.0 = (st.0 + now.duration_since(st.1).as_secs_f64() * self.rate).min(cap);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            std::thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

fn load_cache(path: &Path) -> Result<Vec<CacheRecord>> {
    if path.exists() {
        read_jsonl(path)
    } else {
        Ok(Vec::new())
    }
}

/// Scores every article with `adapter`, reusing cached replies.
///
/// Each article yields exactly one vector or one recorded failure. Transient
/// errors are retried with exponential backoff; invalid replies fail at once
/// (chat adapters already re-prompt internally).
pub fn extract_corpus(
    articles: &[Article],
    adapter: &dyn SentimentAdapter,
    config: &ExtractConfig,
) -> Result<ExtractionOutcome> {
    let model = adapter.model_id();
    let cached = match &config.cache_path {
        Some(p) => load_cache(p)?,
        None => Vec::new(),
    };
    let lookup: HashMap<(&str, &str), &SentimentVector> = cached
        .iter()
        .filter(|r| r.model_id == model)
        .map(|r| ((r.article_id.as_str(), r.request_key.as_str()), &r.vector))
        .collect();

    let keys: Vec<String> = articles.iter().map(|a| adapter.request_key(a)).collect::<Result<_>>()?;
    let warnings = WarningCounter::default();
    let limiter = config.requests_per_second.map(RateLimiter::new);
    let calls = AtomicUsize::new(0);
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<std::result::Result<SentimentVector, AdapterError>>> = vec![None; articles.len()];
    let mut hits = 0;
    let mut pending = Vec::new();
    for (i, (a, k)) in articles.iter().zip(&keys).enumerate() {
        match lookup.get(&(a.id.as_str(), k.as_str())) {
            Some(v) => {
                slots[i] = Some(Ok((*v).clone()));
                hits += 1;
            }
            None => pending.push(i),
        }
    }

    let score_one = |a: &Article| {
        let mut attempt = 0;
        loop {
            if let Some(l) = &limiter {
                l.acquire();
            }
            calls.fetch_add(1, Ordering::SeqCst);
            match adapter.score(a, &warnings) {
                Err(AdapterError::Transient(msg)) if attempt < config.max_retries => {
                    log::debug!("retry {} after: {msg}", a.id);
                    let backoff = config.retry_backoff_ms << attempt.min(6);
                    if backoff > 0 {
                        std::thread::sleep(Duration::from_millis(backoff));
                    }
                    attempt += 1;
                }
                other => return other,
            }
        }
    };

    let workers = config.max_in_flight.max(1).min(pending.len().max(1));
    let done: Vec<(usize, std::result::Result<SentimentVector, AdapterError>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let j = next.fetch_add(1, Ordering::SeqCst);
                        let Some(&i) = pending.get(j) else { break };
                        out.push((i, score_one(&articles[i])));
                    }
                    out
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("extraction worker panicked"))
            .collect()
    });
    for (i, r) in done {
        slots[i] = Some(r);
    }

    let mut outcome = ExtractionOutcome {
        adapter_calls: calls.load(Ordering::SeqCst),
        cache_hits: hits,
        ..Default::default()
    };
    let mut fresh = Vec::new();
    for ((slot, a), key) in slots.into_iter().zip(articles).zip(&keys) {
        match slot.expect("every article scored") {
            Ok(v) => {
                if !lookup.contains_key(&(a.id.as_str(), key.as_str())) {
                    fresh.push(CacheRecord {
                        article_id: a.id.clone(),
                        model_id: model,
                        request_key: key.clone(),
                        vector: v.clone(),
                    });
                }
                outcome.vectors.push(v);
            }
            Err(e) => outcome.failures.push(ExtractionFailure {
                article_id: a.id.clone(),
                model_id: model,
                error: e.to_string(),
            }),
        }
    }
    if let (Some(path), false) = (&config.cache_path, fresh.is_empty()) {
        let mut all = cached.clone();
        all.extend(fresh);
        write_jsonl(path, &all)?;
    }
    outcome.coerced_nulls = warnings.coerced_nulls();
    outcome.clamped = warnings.clamped();
    Ok(outcome)
}

pub fn write_vector_store(path: &Path, vectors: &[SentimentVector]) -> Result<()> {
    write_jsonl(path, vectors)
}

pub fn read_vector_store(path: &Path) -> Result<Vec<SentimentVector>> {
    read_jsonl(path)
}
