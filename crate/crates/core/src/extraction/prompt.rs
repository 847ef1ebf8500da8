use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingestion::Article;
use crate::{Error, Result};

/// System prompt sent verbatim to both chat models.
pub const SYSTEM_PROMPT: &str = include_str!("../../resources/system_prompt.txt");

/// Appended to the conversation when a reply fails to parse.
pub const REPARSE_REMINDER: &str = "Return only the JSON object with the five fields, no other text.";

pub const DEFAULT_CHAR_BUDGET: usize = 8000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_content: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// Cache key component: hash of everything the model sees.
    pub fn prompt_hash(&self, model_name: &str) -> String {
        let mut h = Sha256::new();
        h.update(model_name.as_bytes());
        h.update([0]);
        h.update(self.system_prompt.as_bytes());
        h.update([0]);
        h.update(self.user_content.as_bytes());
        hex::encode(&h.finalize()[..16])
    }
}

/// Title, a blank line, then the body cut back to the last whitespace so the
/// whole user message fits in `char_budget` characters.
pub fn build_prompt(article: &Article, char_budget: usize) -> Result<ChatRequest> {
    let title_len = article.title.chars().count();
    if char_budget < title_len + 100 {
        return Err(Error::domain(format!(
            "char budget {char_budget} below title length {title_len} + 100"
        )));
    }
    let body = article.body.trim();
    let user_content = if body.is_empty() {
        article.title.clone()
    } else {
        let room = char_budget - title_len - 2;
        format!("{}\n\n{}", article.title, truncate_at_whitespace(body, room))
    };
    Ok(ChatRequest {
        system_prompt: SYSTEM_PROMPT.to_string(),
        user_content,
        temperature: 0.0,
        max_tokens: 200,
    })
}

fn truncate_at_whitespace(text: &str, max_chars: usize) -> &str {
    let Some((cut, _)) = text.char_indices().nth(max_chars) else {
        return text;
    };
    if text[cut..].starts_with(char::is_whitespace) {
        return text[..cut].trim_end();
    }
    match text[..cut].rfind(char::is_whitespace) {
        Some(ws) => text[..ws].trim_end(),
        None => &text[..cut],
    }
}
