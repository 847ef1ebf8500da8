use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Source of a sentiment vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    /// Large instruction-tuned chat model.
    LlmA,
    /// Small instruction-tuned chat model.
    LlmB,
    /// Three-class finance sentiment classifier.
    Classifier,
    /// Score supplied by the news vendor.
    Vendor,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::LlmA, ModelId::LlmB, ModelId::Classifier, ModelId::Vendor];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::LlmA => "llm_a",
            ModelId::LlmB => "llm_b",
            ModelId::Classifier => "classifier",
            ModelId::Vendor => "vendor",
        }
    }

    /// Prefix of this model's columns in the feature table.
    pub fn feature_prefix(self) -> &'static str {
        match self {
            ModelId::LlmA => "gpt",
            ModelId::LlmB => "llama",
            ModelId::Classifier => "finbert",
            ModelId::Vendor => "av",
        }
    }

    pub fn is_chat(self) -> bool {
        matches!(self, ModelId::LlmA | ModelId::LlmB)
    }

    /// Which of (relevance, polarity, intensity, uncertainty, forwardness)
    /// this model populates.
    pub fn populated(self) -> [bool; 5] {
        match self {
            ModelId::LlmA | ModelId::LlmB => [true; 5],
            ModelId::Classifier => [false, true, true, false, false],
            ModelId::Vendor => [false, true, false, false, false],
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown model id {s:?}")))
    }
}

/// Relevance below this nulls every other dimension.
pub const RELEVANCE_FLOOR: f64 = 0.1;

/// Per-article scores from one model. Absent dimensions are `None` and
/// serialize as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentVector {
    pub article_id: String,
    pub model_id: ModelId,
    pub relevance: Option<f64>,
    pub polarity: Option<f64>,
    pub intensity: Option<f64>,
    pub uncertainty: Option<f64>,
    pub forwardness: Option<f64>,
}

impl SentimentVector {
    pub fn empty(article_id: impl Into<String>, model_id: ModelId) -> Self {
        SentimentVector {
            article_id: article_id.into(),
            model_id,
            relevance: None,
            polarity: None,
            intensity: None,
            uncertainty: None,
            forwardness: None,
        }
    }

    pub fn dims(&self) -> [Option<f64>; 5] {
        [
            self.relevance,
            self.polarity,
            self.intensity,
            self.uncertainty,
            self.forwardness,
        ]
    }

    /// Checks ranges, the per-model population pattern and the relevance
    /// null rule. Describes the first violation found.
    pub fn check(&self) -> std::result::Result<(), String> {
        let pattern = self.model_id.populated();
        let names = ["relevance", "polarity", "intensity", "uncertainty", "forwardness"];
        for ((value, allowed), name) in self.dims().into_iter().zip(pattern).zip(names) {
            if let Some(v) = value {
                if !allowed {
                    return Err(format!("{} does not populate {name}", self.model_id));
                }
                let lo = if name == "polarity" { -1.0 } else { 0.0 };
                if !(lo..=1.0).contains(&v) {
                    return Err(format!("{name} {v} outside [{lo}, 1]"));
                }
            }
        }
        match (self.model_id.is_chat(), self.relevance) {
            (true, None) => Err("relevance missing".into()),
            (true, Some(r)) if r < RELEVANCE_FLOOR => {
                if self.dims()[1..].iter().any(Option::is_some) {
                    Err(format!("relevance {r} < {RELEVANCE_FLOOR} but other fields set"))
                } else {
                    Ok(())
                }
            }
            (true, Some(_)) => {
                if self.dims()[1..].iter().any(Option::is_none) {
                    Err("relevant article with a null dimension".into())
                } else {
                    Ok(())
                }
            }
            (false, _) => {
                let required = pattern.iter().zip(self.dims()).all(|(p, v)| !p || v.is_some());
                if required {
                    Ok(())
                } else {
                    Err(format!("{} vector missing a populated dimension", self.model_id))
                }
            }
        }
    }
}

/// Counts of silently repaired inputs, shared across worker threads.
#[derive(Debug, Default)]
pub struct WarningCounter {
    coerced_nulls: AtomicU64,
    clamped: AtomicU64,
}

impl WarningCounter {
    pub fn note_coerced(&self) {
        self.coerced_nulls.fetch_add(1, Ordering::Relaxed);
    }

    pub fn note_clamped(&self) {
        self.clamped.fetch_add(1, Ordering::Relaxed);
    }

    /// Low-relevance replies whose other fields were forced to null.
    pub fn coerced_nulls(&self) -> u64 {
        self.coerced_nulls.load(Ordering::Relaxed)
    }

    /// Vendor scores clamped into [-1, 1].
    pub fn clamped(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }
}
