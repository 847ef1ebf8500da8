//! Sources of sentiment vectors: HTTP chat and classifier endpoints, the
//! vendor score, and a deterministic offline stub.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::parse::{classifier_to_scores, parse_scores, render_scores, vendor_passthrough, ValidationError, ValidationKind};
use super::prompt::{build_prompt, ChatRequest, DEFAULT_CHAR_BUDGET, REPARSE_REMINDER};
use super::vector::{ModelId, SentimentVector, WarningCounter};
use crate::ingestion::Article;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdapterError {
    /// Worth retrying: transport failure, throttling, 5xx.
    #[error("transient: {0}")]
    Transient(String),
    /// The reply can never be turned into a valid vector.
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

pub trait SentimentAdapter: Sync {
    fn model_id(&self) -> ModelId;

    /// Digest of everything that determines the reply for `article`.
    fn request_key(&self, article: &Article) -> Result<String>;

    fn score(&self, article: &Article, warnings: &WarningCounter) -> std::result::Result<SentimentVector, AdapterError>;
}

fn invalid(article: &Article, msg: impl Into<String>) -> AdapterError {
    AdapterError::Invalid(ValidationError {
        article_id: article.id.clone(),
        kind: ValidationKind::Other(msg.into()),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChatEndpoint {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model_name: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub char_budget: usize,
    pub max_tokens: u32,
    pub timeout_secs: u64,
    /// Extra attempts after an unparseable reply.
    pub reparse_retries: u32,
}

impl Default for ChatEndpoint {
    fn default() -> Self {
        ChatEndpoint {
            base_url: "https://api.openai.com/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            char_budget: DEFAULT_CHAR_BUDGET,
            max_tokens: 200,
            timeout_secs: 60,
            reparse_retries: 2,
        }
    }
}

/// Chat-completions client: system + user message in, assistant text out.
pub struct ChatAdapter {
    model_id: ModelId,
    endpoint: ChatEndpoint,
    http: reqwest::blocking::Client,
}

impl ChatAdapter {
    pub fn new(model_id: ModelId, endpoint: ChatEndpoint) -> Result<Self> {
        if !model_id.is_chat() {
            return Err(Error::Config(format!("{model_id} is not a chat model")));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(ChatAdapter { model_id, endpoint, http })
    }

    fn request(&self, article: &Article) -> Result<ChatRequest> {
        let mut req = build_prompt(article, self.endpoint.char_budget)?;
        req.max_tokens = self.endpoint.max_tokens;
        Ok(req)
    }

    fn complete(&self, messages: &[Value], req: &ChatRequest) -> std::result::Result<String, String> {
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.endpoint.model_name,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let mut rb = self.http.post(url).json(&body);
        if let Ok(key) = std::env::var(&self.endpoint.api_key_env) {
            rb = rb.bearer_auth(key);
        }
        let reply: Value = rb
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| e.to_string())?;
        reply["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "reply has no choices[0].message.content".to_string())
    }
}

impl SentimentAdapter for ChatAdapter {
    fn model_id(&self) -> ModelId {
        self.model_id
    }

    fn request_key(&self, article: &Article) -> Result<String> {
        Ok(self.request(article)?.prompt_hash(&self.endpoint.model_name))
    }

    fn score(&self, article: &Article, warnings: &WarningCounter) -> std::result::Result<SentimentVector, AdapterError> {
        let req = self.request(article).map_err(|e| invalid(article, e.to_string()))?;
        let mut messages = vec![
            json!({"role": "system", "content": req.system_prompt}),
            json!({"role": "user", "content": req.user_content}),
        ];
        let mut attempt = 0;
        loop {
            let text = self.complete(&messages, &req).map_err(AdapterError::Transient)?;
            match parse_scores(&text, &article.id, self.model_id, warnings) {
                Ok(v) => return Ok(v),
                Err(e) if attempt < self.endpoint.reparse_retries => {
                    log::debug!("reparse {}: {e}", article.id);
                    messages.push(json!({"role": "assistant", "content": text}));
                    messages.push(json!({"role": "user", "content": REPARSE_REMINDER}));
                    attempt += 1;
                }
                Err(e) => return Err(AdapterError::Invalid(e)),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierEndpoint {
    /// Full inference URL; POST `{"inputs": text}`.
    pub url: String,
    pub api_key_env: String,
    pub char_budget: usize,
    pub timeout_secs: u64,
}

impl Default for ClassifierEndpoint {
    fn default() -> Self {
        ClassifierEndpoint {
            url: "https://api-inference.huggingface.co/models/ProsusAI/finbert".into(),
            api_key_env: "HF_API_TOKEN".into(),
            char_budget: 2000,
            timeout_secs: 60,
        }
    }
}

/// Three-class classifier behind an inference endpoint returning
/// `[{"label": .., "score": ..}, ..]` (optionally nested one level).
pub struct ClassifierAdapter {
    endpoint: ClassifierEndpoint,
    http: reqwest::blocking::Client,
}

impl ClassifierAdapter {
    pub fn new(endpoint: ClassifierEndpoint) -> Result<Self> {
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(ClassifierAdapter { endpoint, http })
    }

    fn input_text(&self, article: &Article) -> Result<String> {
        Ok(build_prompt(article, self.endpoint.char_budget.max(article.title.chars().count() + 100))?.user_content)
    }
}

/// Extracts (positive, negative, neutral) from a label/score list.
pub fn class_probabilities(reply: &Value) -> Option<(f64, f64, f64)> {
    let list = match reply.as_array()?.first()? {
        Value::Array(inner) => inner.clone(),
        _ => reply.as_array()?.clone(),
    };
    let mut probs = HashMap::new();
    for entry in list {
        let label = entry["label"].as_str()?.to_lowercase();
        probs.insert(label, entry["score"].as_f64()?);
    }
    Some((*probs.get("positive")?, *probs.get("negative")?, *probs.get("neutral")?))
}

impl SentimentAdapter for ClassifierAdapter {
    fn model_id(&self) -> ModelId {
        ModelId::Classifier
    }

    fn request_key(&self, article: &Article) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.endpoint.url.as_bytes());
        h.update([0]);
        h.update(self.input_text(article)?.as_bytes());
        Ok(hex::encode(&h.finalize()[..16]))
    }

    fn score(&self, article: &Article, _warnings: &WarningCounter) -> std::result::Result<SentimentVector, AdapterError> {
        let text = self.input_text(article).map_err(|e| invalid(article, e.to_string()))?;
        let mut rb = self.http.post(&self.endpoint.url).json(&json!({ "inputs": text }));
        if let Ok(key) = std::env::var(&self.endpoint.api_key_env) {
            rb = rb.bearer_auth(key);
        }
        let reply: Value = rb
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| AdapterError::Transient(e.to_string()))?;
        let (p, n, u) = class_probabilities(&reply).ok_or_else(|| invalid(article, "unrecognized classifier reply"))?;
        // endpoints round their probabilities; renormalize before mapping
        let total = p + n + u;
        if !(total > 0.0) {
            return Err(invalid(article, "classifier probabilities sum to zero"));
        }
        classifier_to_scores(p / total, n / total, u / total, &article.id).map_err(|e| invalid(article, e.to_string()))
    }
}

/// Vendor scores looked up by article id.
pub struct VendorAdapter {
    scores: HashMap<String, f64>,
}

impl VendorAdapter {
    pub fn new(scores: HashMap<String, f64>) -> Self {
        VendorAdapter { scores }
    }
}

impl SentimentAdapter for VendorAdapter {
    fn model_id(&self) -> ModelId {
        ModelId::Vendor
    }

    fn request_key(&self, article: &Article) -> Result<String> {
        Ok(match self.scores.get(&article.id) {
            Some(s) => format!("{s:?}"),
            None => "none".into(),
        })
    }

    fn score(&self, article: &Article, warnings: &WarningCounter) -> std::result::Result<SentimentVector, AdapterError> {
        let raw = *self
            .scores
            .get(&article.id)
            .ok_or_else(|| invalid(article, "no vendor score for article"))?;
        vendor_passthrough(raw, &article.id, warnings).map_err(|e| invalid(article, e.to_string()))
    }
}

const BULLISH: &[&str] = &["rally", "rallies", "surge", "surges", "gain", "gains", "rise", "rises", "tight", "bullish", "jump", "jumps", "climb", "climbs"];
const BEARISH: &[&str] = &["slump", "slumps", "drop", "drops", "fall", "falls", "glut", "bearish", "plunge", "plunges", "slide", "slides", "weak"];
const HEDGES: &[&str] = &["may", "could", "uncertain", "risk", "unclear", "might"];
const FORWARD: &[&str] = &["will", "expect", "expects", "forecast", "outlook", "next", "projected"];

/// Word counts the stub reads from article text.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TextCues {
    pub bullish: usize,
    pub bearish: usize,
    pub hedges: usize,
    pub forward: usize,
    pub words: usize,
}

impl TextCues {
    pub fn of(text: &str) -> Self {
        let mut c = TextCues::default();
        for w in text.split(|ch: char| !ch.is_alphabetic()).filter(|w| !w.is_empty()) {
            let w = w.to_lowercase();
            c.words += 1;
            c.bullish += BULLISH.contains(&w.as_str()) as usize;
            c.bearish += BEARISH.contains(&w.as_str()) as usize;
            c.hedges += HEDGES.contains(&w.as_str()) as usize;
            c.forward += FORWARD.contains(&w.as_str()) as usize;
        }
        c
    }

    /// Net tone in [-1, 1]; `None` without any directional word.
    pub fn tone(&self) -> Option<f64> {
        let n = self.bullish + self.bearish;
        (n > 0).then(|| (self.bullish as f64 - self.bearish as f64) / n as f64)
    }
}

/// How strongly a stub model follows the text cues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StubProfile {
    /// Weight on the lexicon tone; 0 makes polarity pure noise.
    pub signal_weight: f64,
    /// Standard deviation of the additive polarity noise.
    pub noise: f64,
}

impl StubProfile {
    pub fn default_for(model: ModelId) -> Self {
        match model {
            ModelId::LlmA => StubProfile { signal_weight: 0.9, noise: 0.2 },
            ModelId::LlmB => StubProfile { signal_weight: 0.7, noise: 0.35 },
            ModelId::Classifier => StubProfile { signal_weight: 0.0, noise: 0.6 },
            ModelId::Vendor => StubProfile { signal_weight: 0.0, noise: 0.3 },
        }
    }
}

/// Deterministic offline model. Scores are a function of `(seed, model,
/// article id)` plus lexicon cues in the text, and pass through the same
/// parsing or mapping as the real adapter for the model.
pub struct StubAdapter {
    model_id: ModelId,
    seed: u64,
    profile: StubProfile,
    transient_failures: Mutex<HashMap<String, u32>>,
    malformed: HashSet<String>,
    calls: AtomicUsize,
}

impl StubAdapter {
    pub fn new(model_id: ModelId, seed: u64) -> Self {
        StubAdapter {
            model_id,
            seed,
            profile: StubProfile::default_for(model_id),
            transient_failures: Mutex::new(HashMap::new()),
            malformed: HashSet::new(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_profile(mut self, profile: StubProfile) -> Self {
        self.profile = profile;
        self
    }

    /// The next `times` calls for `article_id` fail transiently.
    pub fn fail_transiently(self, article_id: &str, times: u32) -> Self {
        self.transient_failures
            .lock()
            .expect("stub lock")
            .insert(article_id.to_string(), times);
        self
    }

    /// Every reply for `article_id` is unparseable prose.
    pub fn reply_malformed(mut self, article_id: &str) -> Self {
        self.malformed.insert(article_id.to_string());
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn rng_for(&self, article: &Article) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.model_id.as_str().as_bytes());
        h.update([0]);
        h.update(article.id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// Scores before the model-specific output format is applied.
    fn latent(&self, article: &Article) -> [f64; 5] {
        let mut rng = self.rng_for(article);
        let cues = TextCues::of(&format!("{} {}", article.title, article.body));
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let noise = normal.sample(&mut rng) * self.profile.noise;
        let tone = cues.tone().unwrap_or(0.0);
        let polarity = (self.profile.signal_weight * tone + noise).clamp(-1.0, 1.0);
        let relevance = if cues.tone().is_some() {
            rng.gen_range(0.4..1.0)
        } else {
            rng.gen_range(0.0..0.6)
        };
        let intensity = (polarity.abs() * 0.6 + rng.gen_range(0.0..0.4)).clamp(0.0, 1.0);
        let words = cues.words.max(1) as f64;
        let uncertainty = ((cues.hedges as f64 / words) * 8.0 + rng.gen_range(0.0..0.3)).clamp(0.0, 1.0);
        let forwardness = ((cues.forward as f64 / words) * 8.0 + rng.gen_range(0.0..0.5)).clamp(0.0, 1.0);
        let round = |x: f64| (x * 1e4).round() / 1e4;
        [relevance, polarity, intensity, uncertainty, forwardness].map(round)
    }
}

impl SentimentAdapter for StubAdapter {
    fn model_id(&self) -> ModelId {
        self.model_id
    }

    fn request_key(&self, article: &Article) -> Result<String> {
        let req = build_prompt(article, DEFAULT_CHAR_BUDGET.max(article.title.chars().count() + 100))?;
        Ok(req.prompt_hash(&format!("stub-{}-{}", self.model_id, self.seed)))
    }

    fn score(&self, article: &Article, warnings: &WarningCounter) -> std::result::Result<SentimentVector, AdapterError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        {
            let mut failures = self.transient_failures.lock().expect("stub lock");
            if let Some(left) = failures.get_mut(&article.id) {
                if *left > 0 {
                    *left -= 1;
                    return Err(AdapterError::Transient("stub: simulated outage".into()));
                }
            }
        }
        let [re, p, i, u, f] = self.latent(article);
        match self.model_id {
            ModelId::LlmA | ModelId::LlmB => {
                let reply = if self.malformed.contains(&article.id) {
                    "I am unable to analyze this article.".to_string()
                } else {
                    let mut v = SentimentVector::empty(&article.id, self.model_id);
                    v.relevance = Some(re);
                    if re >= super::vector::RELEVANCE_FLOOR {
                        (v.polarity, v.intensity, v.uncertainty, v.forwardness) = (Some(p), Some(i), Some(u), Some(f));
                    }
                    format!("```json\n{}\n```", render_scores(&v))
                };
                parse_scores(&reply, &article.id, self.model_id, warnings).map_err(AdapterError::Invalid)
            }
            ModelId::Classifier => {
                let pos = i * (1.0 + p) / 2.0;
                let neg = i * (1.0 - p) / 2.0;
                classifier_to_scores(pos, neg, 1.0 - pos - neg, &article.id)
                    .map_err(|e| invalid(article, e.to_string()))
            }
            ModelId::Vendor => {
                vendor_passthrough(p * 1.1, &article.id, warnings).map_err(|e| invalid(article, e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn art(id: &str, body: &str) -> Article {
        Article {
            id: id.into(),
            source: "s".into(),
            published_at: "2020-01-01T00:00:00Z".parse().unwrap(),
            title: "Crude update".into(),
            body: body.into(),
            topic_tags: vec![],
        }
    }

    #[test]
    fn stub_follows_population_pattern() {
        let w = WarningCounter::default();
        for m in ModelId::ALL {
            let stub = StubAdapter::new(m, 3);
            for k in 0..50 {
                let v = stub.score(&art(&format!("a{k}"), "prices rally and surge"), &w).unwrap();
                v.check().unwrap();
                assert_eq!(v.model_id, m);
            }
        }
    }

    #[test]
    fn stub_is_deterministic_and_seeded() {
        let w = WarningCounter::default();
        let a = art("x", "oil prices may fall next week");
        let v1 = StubAdapter::new(ModelId::LlmA, 1).score(&a, &w).unwrap();
        let v2 = StubAdapter::new(ModelId::LlmA, 1).score(&a, &w).unwrap();
        let v3 = StubAdapter::new(ModelId::LlmA, 2).score(&a, &w).unwrap();
        assert_eq!(v1, v2);
        assert_ne!(v1, v3);
    }

    #[test]
    fn stub_reads_tone() {
        let w = WarningCounter::default();
        let stub = StubAdapter::new(ModelId::LlmA, 5).with_profile(StubProfile { signal_weight: 1.0, noise: 0.0 });
        let up = stub.score(&art("u", "rally surge gain"), &w).unwrap();
        let down = stub.score(&art("d", "slump plunge glut"), &w).unwrap();
        assert_eq!(up.polarity, Some(1.0));
        assert_eq!(down.polarity, Some(-1.0));
    }

    #[test]
    fn cues_count_words() {
        let c = TextCues::of("Prices may RALLY; glut could ease. Outlook: next week.");
        assert_eq!((c.bullish, c.bearish, c.hedges, c.forward), (1, 1, 2, 2));
        assert_eq!(c.tone(), Some(0.0));
        assert_eq!(TextCues::of("nothing here").tone(), None);
    }

    #[test]
    fn classifier_reply_shapes() {
        let flat = json!([{"label":"positive","score":0.7},{"label":"negative","score":0.1},{"label":"neutral","score":0.2}]);
        assert_eq!(class_probabilities(&flat), Some((0.7, 0.1, 0.2)));
        let nested = json!([[{"label":"Neutral","score":0.5},{"label":"Positive","score":0.25},{"label":"Negative","score":0.25}]]);
        assert_eq!(class_probabilities(&nested), Some((0.25, 0.25, 0.5)));
        assert_eq!(class_probabilities(&json!({"error": "loading"})), None);
    }

    #[test]
    fn vendor_adapter_missing_score_is_invalid() {
        let a = VendorAdapter::new(HashMap::from([("k".to_string(), 0.4)]));
        let w = WarningCounter::default();
        assert_eq!(a.score(&art("k", ""), &w).unwrap().polarity, Some(0.4));
        assert!(matches!(a.score(&art("z", ""), &w), Err(AdapterError::Invalid(_))));
    }
}
