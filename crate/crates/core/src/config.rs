//! Declarative pipeline configuration, read from TOML.
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{DocumentLimits, InteractionFormat, SplitConfig};
use crate::encoder::EncoderConfig;
use crate::evaluation::DEFAULT_KS;
use crate::factorization::{LossKind, MetadataMode, TrainConfig};
use crate::features::FeatureKind;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub corpus: CorpusConfig,
    pub split: SplitSection,
    pub encoder: EncoderConfig,
    pub mf: MfConfig,
    pub eval: EvalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Raw interactions (adjacency or pairs).
    pub interactions: Option<PathBuf>,
    pub interactions_format: InteractionFormat,
    /// Paper text: a CSV with title and abstract columns, one row per item.
    pub documents: Option<PathBuf>,
    /// Item-tag adjacency file.
    pub item_tags: Option<PathBuf>,
    /// Tag names, one per line.
    pub tag_names: Option<PathBuf>,
    /// Canonical dataset directory written by `ingest`.
    pub dataset: PathBuf,
    /// Where features, checkpoints, embeddings and reports go.
    pub artifacts: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            interactions: None,
            interactions_format: InteractionFormat::Adjacency,
            documents: None,
            item_tags: None,
            tag_names: None,
            dataset: PathBuf::from("dataset"),
            artifacts: PathBuf::from("artifacts"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub vocab_size: usize,
    pub max_sentences: usize,
    pub max_words: usize,
    pub n_tags: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        let limits = DocumentLimits::default();
        CorpusConfig {
            vocab_size: 20_000,
            max_sentences: limits.max_sentences,
            max_words: limits.max_words,
            n_tags: 300,
        }
    }
}

impl CorpusConfig {
    pub fn limits(&self) -> DocumentLimits {
        DocumentLimits {
            max_sentences: self.max_sentences,
            max_words: self.max_words,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub p_train_per_user: usize,
    pub seed: u64,
    /// Number of random splits to average over; split `i` uses seed `seed + i`.
    pub n_splits: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitSection {
            p_train_per_user: d.p_train_per_user,
            seed: d.rng_seed,
            n_splits: 1,
        }
    }
}

impl SplitSection {
    pub fn split(&self, index: usize) -> SplitConfig {
        SplitConfig {
            p_train_per_user: self.p_train_per_user,
            rng_seed: self.seed.wrapping_add(index as u64),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfConfig {
    /// Row label in reports; derived from loss and features when absent.
    pub name: Option<String>,
    pub loss: LossKind,
    pub dim: usize,
    pub lambda: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub max_warp_trials: usize,
    pub item_features: FeatureKind,
    /// Dense document embeddings channel; anything but `none` needs an embeddings file.
    pub metadata: MetadataMode,
    pub embeddings: Option<PathBuf>,
    pub seed: u64,
}

impl Default for MfConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        MfConfig {
            name: None,
            loss: t.loss,
            dim: 200,
            lambda: t.lambda,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            max_warp_trials: t.max_warp_trials,
            item_features: FeatureKind::Identity,
            metadata: MetadataMode::None,
            embeddings: None,
            seed: t.seed,
        }
    }
}

impl MfConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            max_warp_trials: self.max_warp_trials,
            lambda: self.lambda,
            seed: self.seed,
        }
    }

    /// "BPR", "WARP", "WARP + Tags", "WARP + TFIDF", "WARP + HAN", ...
    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let mut name = match self.loss {
            LossKind::Bpr => "BPR".to_string(),
            LossKind::Warp => "WARP".to_string(),
        };
        match self.item_features {
            FeatureKind::Identity => {}
            FeatureKind::Tags => name.push_str(" + Tags"),
            FeatureKind::Tfidf => name.push_str(" + TFIDF"),
        }
        if self.metadata != MetadataMode::None {
            name.push_str(" + HAN");
        }
        name
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
    /// Index of the comparison baseline among the evaluated checkpoints.
    pub baseline: usize,
    /// Include the per-user recall matrix in JSON reports.
    pub per_user: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: DEFAULT_KS.to_vec(),
            baseline: 0,
            per_user: false,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, resolves relative paths and validates ranges.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for opt in [
            &mut p.interactions,
            &mut p.documents,
            &mut p.item_tags,
            &mut p.tag_names,
        ] {
            if let Some(path) = opt.as_mut() {
                resolve(base, path);
            }
        }
        resolve(base, &mut p.dataset);
        resolve(base, &mut p.artifacts);
        if let Some(path) = self.mf.embeddings.as_mut() {
            resolve(base, path);
        }
    }

    /// Numeric ranges and cross-section agreement.
    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        if c.vocab_size == 0 || c.max_sentences == 0 || c.max_words == 0 || c.n_tags == 0 {
            return Err(Error::Config("corpus sizes must be positive".into()));
        }
        if self.split.p_train_per_user == 0 || self.split.n_splits == 0 {
            return Err(Error::Config(
                "split.p_train_per_user and split.n_splits must be positive".into(),
            ));
        }
        self.encoder.validate()?;
        let e = &self.encoder;
        if (e.max_sentences, e.max_words, e.n_tags) != (c.max_sentences, c.max_words, c.n_tags) {
            return Err(Error::Config(format!(
                "encoder limits (S={}, W={}, T={}) disagree with corpus (S={}, W={}, T={})",
                e.max_sentences, e.max_words, e.n_tags, c.max_sentences, c.max_words, c.n_tags
            )));
        }
        if self.mf.dim == 0 {
            return Err(Error::Config("mf.dim must be positive".into()));
        }
        self.mf.train_config().validate()?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.ks must be non-empty with every K >= 1".into()));
        }
        Ok(())
    }
}
