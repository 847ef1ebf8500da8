//! Weekly aggregation of article vectors, the 31-column feature table and
//! its six comparison subsets, and descriptive analytics.

mod aggregate;
mod analytics;
mod matrix;
mod schema;

pub use aggregate::{
    aggregate_week, build_weekly_table, momentum_features, relevance_weighted_mean, WeeklyAggregate, WeeklyTable,
};
pub use analytics::{distribution_stats, polarity_corr_matrix, CorrelationMatrix, DistributionStats};
pub use matrix::{assemble_feature_matrix, full_feature_matrix, FeatureMatrix};
pub use schema::{all_columns, column_name, model_features, FeatureKind, FeatureSetId, TABLE_MODELS};
