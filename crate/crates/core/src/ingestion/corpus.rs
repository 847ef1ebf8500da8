use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Datelike, NaiveDate, SecondsFormat, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// One news item. Serialized field order is the article-store schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source: String,
    #[serde(serialize_with = "ser_rfc3339", deserialize_with = "de_rfc3339")]
    pub published_at: DateTime<Utc>,
    pub title: String,
    pub body: String,
    pub topic_tags: Vec<String>,
}

fn ser_rfc3339<S: Serializer>(ts: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&ts.to_rfc3339_opts(SecondsFormat::Secs, true))
}

fn de_rfc3339<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let s = String::deserialize(d)?;
    DateTime::parse_from_rfc3339(&s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(serde::de::Error::custom)
}

/// Inclusive date window the corpus is restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl CorpusWindow {
    pub fn contains(&self, ts: DateTime<Utc>) -> bool {
        let d = ts.date_naive();
        d >= self.start && d <= self.end
    }

    /// Calendar months overlapping the window, in order.
    pub fn months(&self) -> Vec<(i32, u32)> {
        let mut out = Vec::new();
        let (mut y, mut m) = (self.start.year(), self.start.month());
        while (y, m) <= (self.end.year(), self.end.month()) {
            out.push((y, m));
            if m == 12 {
                y += 1;
                m = 1;
            } else {
                m += 1;
            }
        }
        out
    }
}

fn normalize_title(title: &str) -> String {
    title.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn chronological(articles: &mut [Article]) {
    articles.sort_by(|a, b| a.published_at.cmp(&b.published_at).then_with(|| a.id.cmp(&b.id)));
}

/// Drops repeats of (normalized title, publication date), keeping the
/// earliest. Output is in `published_at` order.
pub fn deduplicate(articles: &[Article]) -> Vec<Article> {
    let mut sorted: Vec<Article> = articles.to_vec();
    // stable: equal timestamps keep input order
    sorted.sort_by_key(|a| a.published_at);
    let mut seen = HashSet::new();
    sorted
        .into_iter()
        .filter(|a| seen.insert((normalize_title(&a.title), a.published_at.date_naive())))
        .collect()
}

/// Samples `round(fraction * n)` articles (half rounds up) uniformly without
/// replacement from each calendar month. Each month draws from its own
/// generator derived from `(seed, year, month)`, over the month's articles in
/// canonical `(published_at, id)` order.
pub fn stratified_sample(articles: &[Article], fraction: f64, seed: u64) -> crate::Result<Vec<Article>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(crate::Error::domain(format!("sample fraction {fraction} outside (0, 1]")));
    }
    let mut strata: BTreeMap<(i32, u32), Vec<&Article>> = BTreeMap::new();
    for a in articles {
        let d = a.published_at.date_naive();
        strata.entry((d.year(), d.month())).or_default().push(a);
    }
    let mut out = Vec::new();
    for ((year, month), mut members) in strata {
        members.sort_by(|a, b| a.published_at.cmp(&b.published_at).then_with(|| a.id.cmp(&b.id)));
        let n = members.len();
        let k = ((fraction * n as f64) + 0.5).floor() as usize;
        let k = k.min(n);
        let stream = (year as u64) * 100 + month as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let picked = rand::seq::index::sample(&mut rng, n, k);
        out.extend(picked.into_iter().map(|i| members[i].clone()));
    }
    chronological(&mut out);
    Ok(out)
}
