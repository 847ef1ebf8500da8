use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::eval::{ComparisonConfig, CvConfig};
use crate::extraction::{ChatEndpoint, ClassifierEndpoint, ExtractConfig};
use crate::features::FeatureSetId;
use crate::gbdt::TrainConfig;
use crate::ingestion::{CorpusWindow, NewsClientConfig};
use crate::shap::BACKGROUND_CAP;
use crate::tpe::{SearchSpace, TpeConfig};
use crate::{fsutil, Error, Result};

/// File name of the config copy kept in every run directory.
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub sample_fraction: f64,
    pub sample_seed: u64,
    /// Daily futures closes (`date,close`).
    pub prices_path: PathBuf,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            start: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2025, 12, 31).expect("valid date"),
            sample_fraction: 0.2,
            sample_seed: 0,
            prices_path: PathBuf::from("corpus/prices.csv"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    /// Use the deterministic offline stub for every model.
    pub stub: bool,
    pub stub_seed: u64,
    pub llm_a: ChatEndpoint,
    pub llm_b: ChatEndpoint,
    pub classifier: ClassifierEndpoint,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            stub: false,
            stub_seed: 0,
            llm_a: ChatEndpoint::default(),
            llm_b: ChatEndpoint {
                base_url: "http://localhost:11434/v1".into(),
                model_name: "llama3.2:3b".into(),
                api_key_env: "LLAMA_API_KEY".into(),
                ..ChatEndpoint::default()
            },
            classifier: ClassifierEndpoint::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub background_cap: usize,
    /// Feature set whose attributions feed the report chart.
    pub report_set: FeatureSetId,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            background_cap: BACKGROUND_CAP,
            report_set: FeatureSetId::GptFinbert,
        }
    }
}

/// Everything a run depends on. Relative paths resolve against the run
/// directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Store per-trial wall time in study logs (breaks byte-identical reruns).
    pub record_timings: bool,
    pub sets: Vec<FeatureSetId>,
    pub corpus: CorpusConfig,
    pub news: NewsClientConfig,
    pub adapters: AdapterConfig,
    pub extract: ExtractConfig,
    pub cv: CvConfig,
    pub tpe: TpeConfig,
    pub learner: TrainConfig,
    pub space: Option<SearchSpace>,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("run"),
            record_timings: true,
            sets: FeatureSetId::ALL.to_vec(),
            corpus: CorpusConfig::default(),
            news: NewsClientConfig::default(),
            adapters: AdapterConfig::default(),
            extract: ExtractConfig::default(),
            cv: CvConfig::default(),
            tpe: TpeConfig::default(),
            learner: TrainConfig::default(),
            space: None,
            explain: ExplainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.start > c.end {
            return Err(Error::Config(format!("corpus window start {} after end {}", c.start, c.end)));
        }
        if !(c.sample_fraction > 0.0 && c.sample_fraction <= 1.0) {
            return Err(Error::Config(format!("sample_fraction {} outside (0, 1]", c.sample_fraction)));
        }
        if self.sets.is_empty() {
            return Err(Error::Config("no feature sets selected".into()));
        }
        if self.cv.k < 2 || self.cv.inner_k < 2 {
            return Err(Error::Config("cv.k and cv.inner_k must be at least 2".into()));
        }
        if !self.adapters.stub {
            for (name, ep) in [("llm_a", &self.adapters.llm_a), ("llm_b", &self.adapters.llm_b)] {
                if ep.base_url.is_empty() || ep.model_name.is_empty() {
                    return Err(Error::Config(format!("adapter {name} needs base_url and model_name")));
                }
            }
            if self.adapters.classifier.url.is_empty() {
                return Err(Error::Config("classifier adapter needs a url".into()));
            }
        }
        self.tpe.validate()?;
        self.learner.validate()?;
        if let Some(space) = &self.space {
            space.validate()?;
        }
        Ok(())
    }

    pub fn window(&self) -> CorpusWindow {
        CorpusWindow {
            start: self.corpus.start,
            end: self.corpus.end,
        }
    }

    pub fn comparison(&self) -> ComparisonConfig {
        ComparisonConfig {
            cv: self.cv.clone(),
            tpe: self.tpe,
            space: self.space.clone().unwrap_or_else(SearchSpace::gbdt_default),
            learner: self.learner.clone(),
            seed: self.seed,
            record_timings: self.record_timings,
        }
    }

    /// `path` as given if absolute, else under the run directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.output_dir.join(path)
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serialize config: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(format!("parse config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `output_dir` is taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml(&fsutil::read_to_string(path)?)?;
        if cfg.output_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.output_dir = normalize(&base.join(&cfg.output_dir));
        }
        Ok(cfg)
    }

    /// Writes the config into its run directory, with `output_dir` recorded
    /// as `.` so the copy does not depend on where the run lives.
    pub fn save(&self) -> Result<PathBuf> {
        let path = self.output_dir.join(CONFIG_FILE);
        let copy = RunConfig {
            output_dir: PathBuf::from("."),
            ..self.clone()
        };
        fsutil::write_atomic(&path, copy.to_toml()?.as_bytes())?;
        Ok(path)
    }
}

fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            std::path::Component::CurDir => {}
            other => out.push(other),
        }
    }
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    out
}
