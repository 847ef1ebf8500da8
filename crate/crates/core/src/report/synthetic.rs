//! Synthetic corpus and prices with a planted signal: each week has a latent
//! direction that tilts the tone of that week's articles and, with a fixed
//! probability, sets the sign of the following week's return.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingestion::{format_feed_time, raw_cache_path, render_feed, write_prices_csv, PriceBar, RawFeedItem, RawTopic};
use crate::{fsutil, Error, Result};

const BULL: &[&str] = &["rally", "surge", "gain", "rise", "tight", "jump", "climb"];
const BEAR: &[&str] = &["slump", "drop", "fall", "glut", "plunge", "slide", "weak"];
const HEDGE: &[&str] = &["may", "could", "uncertain", "risk", "unclear"];
const FORWARD: &[&str] = &["will", "expect", "forecast", "outlook", "next"];
const FILLER: &[&str] = &[
    "crude", "barrel", "traders", "inventory", "refinery", "pipeline", "output", "demand", "supply", "shipping",
    "exports", "market", "futures", "benchmark", "session", "analysts", "storage", "cargo",
];
const SOURCES: &[&str] = &["Wire One", "Energy Desk", "Market Daily", "Oil Monitor"];
pub const ENERGY_TOPIC: &str = "Energy & Transportation";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_weeks: usize,
    /// Monday of the first week.
    pub start: NaiveDate,
    pub min_articles: usize,
    pub max_articles: usize,
    /// Mean article tone is `tone_signal` times the week's latent direction.
    pub tone_signal: f64,
    pub tone_noise: f64,
    /// Probability the next week's return has the latent direction's sign.
    pub sign_agreement: f64,
    /// Share of items in the feed without the energy topic tag.
    pub off_topic_rate: f64,
    /// Share of items repeated under a second url.
    pub duplicate_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_weeks: 320,
            start: NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date"),
            min_articles: 8,
            max_articles: 14,
            tone_signal: 0.35,
            tone_noise: 0.5,
            sign_agreement: 0.75,
            off_topic_rate: 0.05,
            duplicate_rate: 0.03,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Latent direction per week, +1 or -1.
    pub latent: Vec<i8>,
    pub feed: Vec<RawFeedItem>,
    pub bars: Vec<PriceBar>,
}

impl SyntheticSpec {
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(7 * self.n_weeks as i64 - 1)
    }
}

fn article_text(rng: &mut ChaCha8Rng, tone: Option<f64>) -> String {
    let mut words: Vec<&str> = Vec::new();
    if let Some(t) = tone {
        let k = rng.gen_range(4..=10);
        let bull = ((k as f64) * (1.0 + t) / 2.0).round() as usize;
        words.extend((0..bull).map(|_| *BULL.choose(rng).expect("nonempty")));
        words.extend((0..k - bull).map(|_| *BEAR.choose(rng).expect("nonempty")));
    }
    let hedges = rng.gen_range(0..=3);
    words.extend((0..hedges).map(|_| *HEDGE.choose(rng).expect("nonempty")));
    let forward = rng.gen_range(0..=3);
    words.extend((0..forward).map(|_| *FORWARD.choose(rng).expect("nonempty")));
    let filler = rng.gen_range(20..40);
    words.extend((0..filler).map(|_| *FILLER.choose(rng).expect("nonempty")));
    words.shuffle(rng);
    let mut text = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            text.push(if i % 12 == 0 { '.' } else { ' ' });
            if i % 12 == 0 {
                text.push(' ');
            }
        }
        text.push_str(w);
    }
    text.push('.');
    text
}

/// Generates the corpus feed and daily closes. Week `t` articles lean toward
/// `latent[t]`; the return from week `t` to `t + 1` has that sign with
/// probability `sign_agreement`.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n_weeks < 2 || spec.min_articles == 0 || spec.min_articles > spec.max_articles {
        return Err(Error::domain("synthetic spec: need >= 2 weeks and 1 <= min_articles <= max_articles"));
    }
    if spec.start.weekday() != chrono::Weekday::Mon {
        return Err(Error::domain("synthetic spec: start must be a Monday"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tone_noise = Normal::new(0.0, spec.tone_noise).map_err(|e| Error::domain(e.to_string()))?;
    let vendor_noise = Normal::<f64>::new(0.0, 0.25).expect("valid sd");
    let ret_size = Normal::<f64>::new(0.0, 0.04).expect("valid sd");

    let latent: Vec<i8> = (0..spec.n_weeks).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();

    let mut feed = Vec::new();
    let mut serial = 0usize;
    for (t, &s) in latent.iter().enumerate() {
        let monday = spec.start + Duration::days(7 * t as i64);
        let n = rng.gen_range(spec.min_articles..=spec.max_articles);
        for _ in 0..n {
            serial += 1;
            // some items carry no directional words at all
            let tone = (!rng.gen_bool(0.15))
                .then(|| (spec.tone_signal * s as f64 + tone_noise.sample(&mut rng)).clamp(-1.0, 1.0));
            let ts = Utc.from_utc_datetime(
                &monday
                    .and_hms_opt(0, 0, 0)
                    .expect("midnight")
                    .checked_add_signed(Duration::seconds(rng.gen_range(0..7 * 86_400)))
                    .expect("in range"),
            );
            let on_topic = !rng.gen_bool(spec.off_topic_rate);
            let mut topics = vec![RawTopic {
                topic: "Financial Markets".into(),
                relevance_score: "0.4".into(),
            }];
            if on_topic {
                topics.insert(
                    0,
                    RawTopic {
                        topic: ENERGY_TOPIC.into(),
                        relevance_score: format!("{:.2}", rng.gen_range(0.5..1.0)),
                    },
                );
            }
            let item = RawFeedItem {
                title: format!("Oil market note {serial}: {}", if tone.is_some() { "prices move" } else { "industry update" }),
                url: format!("https://news.example/{serial}"),
                time_published: format_feed_time(ts),
                summary: article_text(&mut rng, tone),
                source: SOURCES[serial % SOURCES.len()].into(),
                topics,
                overall_sentiment_score: ((vendor_noise.sample(&mut rng) * 1e4).round() / 1e4).clamp(-1.0, 1.0),
            };
            if rng.gen_bool(spec.duplicate_rate) {
                let mut dup = item.clone();
                dup.url = format!("https://mirror.example/{serial}");
                feed.push(dup);
            }
            feed.push(item);
        }
    }

    // weekly closes for weeks 0..=n_weeks; daily bars Monday to Friday
    let mut bars = Vec::new();
    let mut close = 60.0f64;
    for t in 0..=spec.n_weeks {
        let monday = spec.start + Duration::days(7 * t as i64);
        let prev = close;
        if t > 0 {
            let sign = if rng.gen_bool(spec.sign_agreement) { latent[t - 1] } else { -latent[t - 1] } as f64;
            let r = sign * (ret_size.sample(&mut rng).abs() + 0.001);
            close = prev * r.exp();
        }
        for d in 0..5 {
            let day = monday + Duration::days(d);
            let price = if d == 4 {
                close
            } else {
                let w = (d + 1) as f64 / 5.0;
                prev + (close - prev) * w + rng.gen_range(-0.3..0.3)
            };
            bars.push(PriceBar {
                trade_date: day,
                close: (price * 1e4).round() / 1e4,
            });
        }
        bars.last_mut().expect("friday bar").close = close;
    }
    Ok(SyntheticData { latent, feed, bars })
}

/// Writes one raw feed file per month under `cache_dir` and the daily
/// closes to `prices_path`.
pub fn write_synthetic_inputs(data: &SyntheticData, cache_dir: &Path, prices_path: &Path) -> Result<()> {
    let mut months: BTreeMap<(i32, u32), Vec<RawFeedItem>> = BTreeMap::new();
    for item in &data.feed {
        let y: i32 = item.time_published[0..4].parse().map_err(|_| Error::domain("bad feed time"))?;
        let m: u32 = item.time_published[4..6].parse().map_err(|_| Error::domain("bad feed time"))?;
        months.entry((y, m)).or_default().push(item.clone());
    }
    for ((y, m), items) in months {
        fsutil::write_atomic(&raw_cache_path(cache_dir, y, m), render_feed(&items)?.as_bytes())?;
    }
    write_prices_csv(prices_path, &data.bars)
}
