//! Article-level sentiment vectors from chat models, a classifier and the
//! vendor feed.

mod adapters;
mod parse;
mod prompt;
mod runner;
mod vector;

pub use adapters::{
    class_probabilities, AdapterError, ChatAdapter, ChatEndpoint, ClassifierAdapter, ClassifierEndpoint,
    SentimentAdapter, StubAdapter, StubProfile, TextCues, VendorAdapter,
};
pub use parse::{
    classifier_to_scores, parse_scores, render_scores, vendor_passthrough, ValidationError, ValidationKind,
};
pub use prompt::{build_prompt, ChatRequest, DEFAULT_CHAR_BUDGET, REPARSE_REMINDER, SYSTEM_PROMPT};
pub use runner::{
    extract_corpus, read_vector_store, write_vector_store, ExtractConfig, ExtractionFailure, ExtractionOutcome,
    RateLimiter,
};
pub use vector::{ModelId, SentimentVector, WarningCounter, RELEVANCE_FLOOR};
