use serde_json::{Map, Value};

use super::vector::{ModelId, SentimentVector, WarningCounter, RELEVANCE_FLOOR};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("article {article_id}: {kind}")]
pub struct ValidationError {
    pub article_id: String,
    pub kind: ValidationKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationKind {
    #[error("no JSON object in reply")]
    NoObject,
    #[error("{0} JSON objects in reply, expected one")]
    MultipleObjects(usize),
    #[error("invalid JSON: {0}")]
    Syntax(String),
    #[error("missing key {0:?}")]
    MissingKey(&'static str),
    #[error("{0} is neither a number nor null")]
    NotNumber(&'static str),
    #[error("{field} = {value} outside [{low}, {high}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },
    #[error("relevance is null")]
    NullRelevance,
    #[error("{0} is null although relevance >= 0.1")]
    UnexpectedNull(&'static str),
    #[error("adapter reply could not be used: {0}")]
    Other(String),
}

const FIELDS: [(&str, f64); 5] = [
    ("relevance", 0.0),
    ("polarity", -1.0),
    ("intensity", 0.0),
    ("uncertainty", 0.0),
    ("forwardness", 0.0),
];

fn strip_fences(raw: &str) -> &str {
    let t = raw.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    // drop the info string (e.g. "json") on the opening fence line
    let rest = match rest.find('\n') {
        Some(nl) => &rest[nl + 1..],
        None => rest,
    };
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// Byte spans of top-level `{...}` groups, ignoring braces inside strings.
fn object_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (i, b) in text.bytes().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start, i + 1));
                }
            }
            _ => {}
        }
    }
    spans
}

/// Parses a chat model reply into a validated vector.
///
/// Accepts an optional markdown fence around exactly one JSON object with the
/// five score keys. A relevance below 0.1 forces the other fields to null
/// (counted in `warnings` when the reply had set them).
pub fn parse_scores(
    raw_text: &str,
    article_id: &str,
    model_id: ModelId,
    warnings: &WarningCounter,
) -> std::result::Result<SentimentVector, ValidationError> {
    let fail = |kind| ValidationError {
        article_id: article_id.to_string(),
        kind,
    };
    let text = strip_fences(raw_text);
    let spans = object_spans(text);
    let (s, e) = match spans.len() {
        0 => return Err(fail(ValidationKind::NoObject)),
        1 => spans[0],
        n => return Err(fail(ValidationKind::MultipleObjects(n))),
    };
    let obj: Map<String, Value> =
        serde_json::from_str(&text[s..e]).map_err(|err| fail(ValidationKind::Syntax(err.to_string())))?;

    let mut values = [None; 5];
    for (slot, (name, low)) in values.iter_mut().zip(FIELDS) {
        let v = obj.get(name).ok_or_else(|| fail(ValidationKind::MissingKey(name)))?;
        *slot = match v {
            Value::Null => None,
            Value::Number(n) => {
                let x = n.as_f64().ok_or_else(|| fail(ValidationKind::NotNumber(name)))?;
                if !(low..=1.0).contains(&x) {
                    return Err(fail(ValidationKind::OutOfRange {
                        field: name,
                        value: x,
                        low,
                        high: 1.0,
                    }));
                }
                Some(x)
            }
            _ => return Err(fail(ValidationKind::NotNumber(name))),
        };
    }
    let relevance = values[0].ok_or_else(|| fail(ValidationKind::NullRelevance))?;
    if relevance < RELEVANCE_FLOOR {
        if values[1..].iter().any(Option::is_some) {
            warnings.note_coerced();
            values[1..].iter_mut().for_each(|v| *v = None);
        }
    } else if let Some(i) = values[1..].iter().position(Option::is_none) {
        return Err(fail(ValidationKind::UnexpectedNull(FIELDS[i + 1].0)));
    }
    Ok(SentimentVector {
        article_id: article_id.to_string(),
        model_id,
        relevance: values[0],
        polarity: values[1],
        intensity: values[2],
        uncertainty: values[3],
        forwardness: values[4],
    })
}

/// Reply text a well-behaved chat model would return for `v`.
pub fn render_scores(v: &SentimentVector) -> String {
    let obj = serde_json::json!({
        "relevance": v.relevance,
        "polarity": v.polarity,
        "intensity": v.intensity,
        "uncertainty": v.uncertainty,
        "forwardness": v.forwardness,
    });
    obj.to_string()
}

/// Maps three-class probabilities to polarity `P(pos) - P(neg)` and
/// intensity `1 - P(neu)`.
pub fn classifier_to_scores(
    p_positive: f64,
    p_negative: f64,
    p_neutral: f64,
    article_id: &str,
) -> Result<SentimentVector> {
    let ps = [p_positive, p_negative, p_neutral];
    if ps.iter().any(|p| !p.is_finite() || *p < 0.0) || (ps.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(Error::domain(format!(
            "article {article_id}: class probabilities {ps:?} do not form a distribution"
        )));
    }
    let mut v = SentimentVector::empty(article_id, ModelId::Classifier);
    v.polarity = Some((p_positive - p_negative).clamp(-1.0, 1.0));
    v.intensity = Some((1.0 - p_neutral).clamp(0.0, 1.0));
    Ok(v)
}

/// Vendor score clamped to [-1, 1] as polarity; nothing else populated.
pub fn vendor_passthrough(raw_score: f64, article_id: &str, warnings: &WarningCounter) -> Result<SentimentVector> {
    if !raw_score.is_finite() {
        return Err(Error::domain(format!("article {article_id}: vendor score {raw_score} not finite")));
    }
    let clamped = raw_score.clamp(-1.0, 1.0);
    if clamped != raw_score {
        warnings.note_clamped();
    }
    let mut v = SentimentVector::empty(article_id, ModelId::Vendor);
    v.polarity = Some(clamped);
    Ok(v)
}
