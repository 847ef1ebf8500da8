use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::extraction::ModelId;
use crate::{Error, Result};

/// One weekly statistic of one model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    ArticleCount,
    RelevanceMean,
    PolarityMean,
    IntensityMean,
    UncertaintyMean,
    ForwardnessMean,
    PolarityStd,
    UncertaintyStd,
    PolarityMomentum,
    UncertaintyMomentum,
    ForwardnessMomentum,
}

impl FeatureKind {
    pub fn suffix(self) -> &'static str {
        match self {
            FeatureKind::ArticleCount => "article_count",
            FeatureKind::RelevanceMean => "relevance_mean",
            FeatureKind::PolarityMean => "polarity_mean",
            FeatureKind::IntensityMean => "intensity_mean",
            FeatureKind::UncertaintyMean => "uncertainty_mean",
            FeatureKind::ForwardnessMean => "forwardness_mean",
            FeatureKind::PolarityStd => "polarity_std",
            FeatureKind::UncertaintyStd => "uncertainty_std",
            FeatureKind::PolarityMomentum => "polarity_momentum",
            FeatureKind::UncertaintyMomentum => "uncertainty_momentum",
            FeatureKind::ForwardnessMomentum => "forwardness_momentum",
        }
    }
}

/// Columns each model contributes, in feature-table order.
pub fn model_features(model: ModelId) -> &'static [FeatureKind] {
    use FeatureKind::*;
    match model {
        ModelId::LlmA | ModelId::LlmB => &[
            ArticleCount,
            RelevanceMean,
            PolarityMean,
            IntensityMean,
            UncertaintyMean,
            ForwardnessMean,
            PolarityStd,
            UncertaintyStd,
            PolarityMomentum,
            UncertaintyMomentum,
            ForwardnessMomentum,
        ],
        ModelId::Classifier => &[ArticleCount, PolarityMean, PolarityStd, IntensityMean, PolarityMomentum],
        ModelId::Vendor => &[ArticleCount, PolarityMean, PolarityStd, PolarityMomentum],
    }
}

pub fn column_name(model: ModelId, kind: FeatureKind) -> String {
    format!("{}_{}", model.feature_prefix(), kind.suffix())
}

/// Model order of the full feature table.
pub const TABLE_MODELS: [ModelId; 4] = [ModelId::LlmA, ModelId::LlmB, ModelId::Classifier, ModelId::Vendor];

/// All 31 columns of the weekly feature table.
pub fn all_columns() -> Vec<(ModelId, FeatureKind, String)> {
    TABLE_MODELS
        .iter()
        .flat_map(|&m| model_features(m).iter().map(move |&k| (m, k, column_name(m, k))))
        .collect()
}

/// The six feature combinations compared by the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSetId {
    AvBaseline,
    Tradition,
    Gpt,
    Llama,
    Llm,
    GptFinbert,
}

impl FeatureSetId {
    pub const ALL: [FeatureSetId; 6] = [
        FeatureSetId::AvBaseline,
        FeatureSetId::Tradition,
        FeatureSetId::Gpt,
        FeatureSetId::Llama,
        FeatureSetId::Llm,
        FeatureSetId::GptFinbert,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetId::AvBaseline => "av_baseline",
            FeatureSetId::Tradition => "tradition",
            FeatureSetId::Gpt => "gpt",
            FeatureSetId::Llama => "llama",
            FeatureSetId::Llm => "llm",
            FeatureSetId::GptFinbert => "gpt_finbert",
        }
    }

    pub fn models(self) -> &'static [ModelId] {
        match self {
            FeatureSetId::AvBaseline => &[ModelId::Vendor],
            FeatureSetId::Tradition => &[ModelId::Vendor, ModelId::Classifier],
            FeatureSetId::Gpt => &[ModelId::LlmA],
            FeatureSetId::Llama => &[ModelId::LlmB],
            FeatureSetId::Llm => &[ModelId::LlmA, ModelId::LlmB],
            FeatureSetId::GptFinbert => &[ModelId::LlmA, ModelId::Classifier],
        }
    }

    pub fn columns(self) -> Vec<String> {
        self.models()
            .iter()
            .flat_map(|&m| model_features(m).iter().map(move |&k| column_name(m, k)))
            .collect()
    }

    /// Parses a comma-separated list such as `gpt,av_baseline`.
    pub fn parse_list(s: &str) -> Result<Vec<FeatureSetId>> {
        s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for FeatureSetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureSetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSetId::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::domain(format!("unknown feature set {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirty_one_columns() {
        let cols = all_columns();
        assert_eq!(cols.len(), 31);
        assert_eq!(cols[0].2, "gpt_article_count");
        assert_eq!(cols[30].2, "av_polarity_momentum");
    }

    #[test]
    fn set_sizes() {
        let sizes: Vec<_> = FeatureSetId::ALL.iter().map(|s| s.columns().len()).collect();
        assert_eq!(sizes, vec![4, 9, 11, 11, 22, 16]);
    }

    #[test]
    fn parse_sets() {
        assert_eq!(
            FeatureSetId::parse_list("gpt, av_baseline").unwrap(),
            vec![FeatureSetId::Gpt, FeatureSetId::AvBaseline]
        );
        assert!(FeatureSetId::parse_list("gpt,bogus").is_err());
    }
}
