//! News corpus acquisition and the weekly price, return and label series.

mod corpus;
mod fetch;
mod prices;
mod week;

pub use corpus::{deduplicate, stratified_sample, Article, CorpusWindow};
pub use fetch::{
    format_feed_time, normalize_topic, raw_cache_path, render_feed, vendor_scores_from_cache, NewsClient,
    NewsClientConfig, RawFeedItem, RawTopic, MAX_PAGE_SIZE, NEWS_API_KEY_ENV,
};
pub use prices::{
    make_labels, read_prices_csv, weekly_close_series, weekly_log_returns, write_prices_csv, LabelSeries, PriceBar,
    ReturnSeries,
};
pub use week::{assign_week, WeekKey};
