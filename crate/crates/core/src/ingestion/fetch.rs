//! Paged-JSON news feed client with a per-month raw response cache.
//!
//! The wire format follows the vendor's news-sentiment endpoint: a GET with
//! `topics`, `time_from`, `time_to` and `limit` query parameters returning
//! `{"feed": [...]}`. Raw bodies are cached as `raw/YYYY-MM.json` under the
//! cache directory, so a warm cache serves every month without a request.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use chrono::{NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::corpus::{deduplicate, Article, CorpusWindow};
use crate::fsutil::{read_to_string, write_atomic};
use crate::{Error, Result};

/// Environment variable holding the news API key.
pub const NEWS_API_KEY_ENV: &str = "WTISENT_NEWS_API_KEY";
/// Vendor cap on items per call.
pub const MAX_PAGE_SIZE: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NewsClientConfig {
    pub base_url: String,
    /// Overrides the environment variable when set.
    pub api_key: Option<String>,
    pub topic: String,
    pub page_size: usize,
    pub cache_dir: PathBuf,
    pub max_retries: u32,
    pub retry_backoff_ms: u64,
    pub timeout_secs: u64,
    /// Skip months whose payload fails to parse instead of aborting.
    pub lenient: bool,
    pub max_in_flight: usize,
}

impl Default for NewsClientConfig {
    fn default() -> Self {
        NewsClientConfig {
            base_url: "https://www.alphavantage.co".into(),
            api_key: None,
            topic: "energy_transportation".into(),
            page_size: MAX_PAGE_SIZE,
            cache_dir: PathBuf::from("corpus"),
            max_retries: 3,
            retry_backoff_ms: 500,
            timeout_secs: 30,
            lenient: false,
            max_in_flight: 4,
        }
    }
}

#[derive(Debug, Deserialize)]
struct FeedPayload {
    feed: Vec<FeedItem>,
}

#[derive(Debug, Deserialize)]
struct FeedItem {
    #[serde(default)]
    url: String,
    title: String,
    time_published: String,
    #[serde(default)]
    summary: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    topics: Vec<FeedTopic>,
    #[serde(default)]
    overall_sentiment_score: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct FeedTopic {
    topic: String,
}

/// Lowercases and collapses non-alphanumeric runs to `_`, so the feed's
/// display label "Energy & Transportation" matches the query tag
/// `energy_transportation`.
pub fn normalize_topic(label: &str) -> String {
    let mut out = String::new();
    let mut gap = false;
    for ch in label.chars() {
        if ch.is_alphanumeric() {
            if gap && !out.is_empty() {
                out.push('_');
            }
            gap = false;
            out.extend(ch.to_lowercase());
        } else {
            gap = true;
        }
    }
    out
}

fn article_id(item: &FeedItem) -> String {
    if !item.url.is_empty() {
        return item.url.clone();
    }
    let mut h = Sha256::new();
    h.update(item.title.as_bytes());
    h.update(b"|");
    h.update(item.time_published.as_bytes());
    hex::encode(&h.finalize()[..12])
}

fn parse_time(s: &str) -> Option<chrono::DateTime<Utc>> {
    let fmt = if s.len() == 13 { "%Y%m%dT%H%M" } else { "%Y%m%dT%H%M%S" };
    NaiveDateTime::parse_from_str(s, fmt).ok().map(|t| Utc.from_utc_datetime(&t))
}

fn month_key(year: i32, month: u32) -> String {
    format!("{year:04}-{month:02}")
}

/// Path of the cached raw response for a month.
pub fn raw_cache_path(cache_dir: &Path, year: i32, month: u32) -> PathBuf {
    cache_dir.join("raw").join(format!("{}.json", month_key(year, month)))
}

fn month_bounds(year: i32, month: u32) -> Result<(NaiveDate, NaiveDate)> {
    let first = NaiveDate::from_ymd_opt(year, month, 1)
        .ok_or_else(|| Error::domain(format!("invalid month {}", month_key(year, month))))?;
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    Ok((first, next.pred_opt().expect("valid date")))
}

/// Blocking client; `requests` counts network calls actually made.
pub struct NewsClient {
    config: NewsClientConfig,
    window: CorpusWindow,
    http: reqwest::blocking::Client,
    requests: AtomicUsize,
}

impl NewsClient {
    pub fn new(config: NewsClientConfig, window: CorpusWindow) -> Result<Self> {
        if config.page_size == 0 || config.page_size > MAX_PAGE_SIZE {
            return Err(Error::Config(format!(
                "page_size must be in 1..={MAX_PAGE_SIZE}, got {}",
                config.page_size
            )));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(NewsClient {
            config,
            window,
            http,
            requests: AtomicUsize::new(0),
        })
    }

    pub fn requests_made(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    fn api_key(&self) -> String {
        self.config
            .api_key
            .clone()
            .or_else(|| std::env::var(NEWS_API_KEY_ENV).ok())
            .unwrap_or_else(|| "demo".into())
    }

    fn request_month(&self, year: i32, month: u32) -> Result<String> {
        let (first, last) = month_bounds(year, month)?;
        let url = format!("{}/query", self.config.base_url.trim_end_matches('/'));
        let query = [
            ("function", "NEWS_SENTIMENT".to_string()),
            ("topics", self.config.topic.clone()),
            ("time_from", format!("{}T0000", first.format("%Y%m%d"))),
            ("time_to", format!("{}T2359", last.format("%Y%m%d"))),
            ("sort", "EARLIEST".to_string()),
            ("limit", self.config.page_size.to_string()),
            ("apikey", self.api_key()),
        ];
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let backoff = self.config.retry_backoff_ms << (attempt - 1).min(6);
                std::thread::sleep(Duration::from_millis(backoff));
            }
            self.requests.fetch_add(1, Ordering::SeqCst);
            let resp = self.http.get(&url).query(&query).send();
            match resp.and_then(|r| r.error_for_status()).and_then(|r| r.text()) {
                Ok(body) => return Ok(body),
                Err(e) => {
                    log::warn!("fetch {} attempt {attempt}: {e}", month_key(year, month));
                    last_err = e.to_string();
                }
            }
        }
        Err(Error::Fetch {
            month: month_key(year, month),
            message: last_err,
        })
    }

    /// Articles for one calendar month carrying the configured topic tag.
    pub fn fetch_news_month(&self, year: i32, month: u32) -> Result<Vec<Article>> {
        let path = raw_cache_path(&self.config.cache_dir, year, month);
        let raw = if path.exists() {
            read_to_string(&path)?
        } else {
            let body = self.request_month(year, month)?;
            // Validate before caching so a bad payload is re-requested next run.
            parse_feed(&body, year, month)?;
            write_atomic(&path, body.as_bytes())?;
            body
        };
        let items = parse_feed(&raw, year, month)?;
        Ok(items
            .into_iter()
            .filter_map(|item| to_article(item, &self.config.topic))
            .filter(|a| self.window.contains(a.published_at))
            .collect())
    }

    /// Fetches every month in the window with a bounded number of concurrent
    /// requests, then deduplicates. Month order is preserved.
    pub fn fetch_corpus(&self) -> Result<Vec<Article>> {
        let months = self.window.months();
        let next = AtomicUsize::new(0);
        let mut slots: Vec<Option<Result<Vec<Article>>>> = (0..months.len()).map(|_| None).collect();
        let workers = self.config.max_in_flight.max(1).min(months.len().max(1));
        let results: Vec<Vec<(usize, Result<Vec<Article>>)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut done = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            if i >= months.len() {
                                break;
                            }
                            let (y, m) = months[i];
                            done.push((i, self.fetch_news_month(y, m)));
                        }
                        done
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fetch worker panicked")).collect()
        });
        for (i, r) in results.into_iter().flatten() {
            slots[i] = Some(r);
        }
        let mut all = Vec::new();
        for slot in slots {
            match slot.expect("every month fetched") {
                Ok(arts) => all.extend(arts),
                Err(e @ Error::Payload { .. }) if self.config.lenient => {
                    log::warn!("skipping month: {e}");
                }
                Err(e) => return Err(e),
            }
        }
        Ok(deduplicate(&all))
    }
}

fn parse_feed(raw: &str, year: i32, month: u32) -> Result<Vec<FeedItem>> {
    serde_json::from_str::<FeedPayload>(raw)
        .map(|p| p.feed)
        .map_err(|e| Error::Payload {
            month: month_key(year, month),
            message: e.to_string(),
        })
}

fn to_article(item: FeedItem, topic: &str) -> Option<Article> {
    let tags: Vec<String> = item.topics.iter().map(|t| normalize_topic(&t.topic)).collect();
    if !tags.iter().any(|t| t == topic) {
        return None;
    }
    let published_at = parse_time(&item.time_published)?;
    Some(Article {
        id: article_id(&item),
        source: item.source.clone(),
        published_at,
        title: item.title.clone(),
        body: item.summary.clone(),
        topic_tags: tags,
    })
}

/// Vendor sentiment scores keyed by article id, read back from the raw cache.
pub fn vendor_scores_from_cache(cache_dir: &Path) -> Result<HashMap<String, f64>> {
    let dir = cache_dir.join("raw");
    let mut out = HashMap::new();
    let entries = std::fs::read_dir(&dir).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(vec![dir.clone()])
        } else {
            Error::io(&dir, e)
        }
    })?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "json")) {
        let raw = read_to_string(&path)?;
        let payload: FeedPayload = serde_json::from_str(&raw).map_err(|e| Error::Payload {
            month: path.display().to_string(),
            message: e.to_string(),
        })?;
        for item in payload.feed {
            if let Some(score) = item.overall_sentiment_score {
                out.insert(article_id(&item), score);
            }
        }
    }
    Ok(out)
}

/// Raw feed item as the vendor serializes it; used to write synthetic caches.
#[derive(Debug, Clone, Serialize)]
pub struct RawFeedItem {
    pub title: String,
    pub url: String,
    pub time_published: String,
    pub summary: String,
    pub source: String,
    pub topics: Vec<RawTopic>,
    pub overall_sentiment_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RawTopic {
    pub topic: String,
    pub relevance_score: String,
}

/// Serializes a month of items in the vendor payload shape.
pub fn render_feed(items: &[RawFeedItem]) -> Result<String> {
    #[derive(Serialize)]
    struct Payload<'a> {
        items: String,
        sentiment_score_definition: &'a str,
        feed: &'a [RawFeedItem],
    }
    Ok(serde_json::to_string_pretty(&Payload {
        items: items.len().to_string(),
        sentiment_score_definition: "x <= -0.35: Bearish; x >= 0.35: Bullish",
        feed: items,
    })?)
}

pub fn format_feed_time(ts: chrono::DateTime<Utc>) -> String {
    ts.format("%Y%m%dT%H%M%S").to_string()
}
