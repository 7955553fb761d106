use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EpochLog, FactorizationModel, MetadataMode, TrainConfig};
use crate::corpus::SplitConfig;
use crate::features::FeatureKind;
use crate::{Error, Result};

pub const MF_FORMAT: &str = "tagrec-mf/1";

/// One trained model per train/test split, plus what is needed to rebuild
/// their inputs from the canonical dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfCheckpoint {
    pub format: String,
    /// Row label in comparison tables, e.g. "WARP + HAN".
    pub name: String,
    pub train: TrainConfig,
    pub d: usize,
    pub item_features: FeatureKind,
    pub metadata: MetadataMode,
    /// Corpus settings the item features were built with.
    pub vocab_size: usize,
    pub n_tags: usize,
    pub n_users: usize,
    pub n_items: usize,
    pub n_user_features: usize,
    pub n_item_features: usize,
    pub dense_dim: Option<usize>,
    /// Dense embeddings file, relative to the checkpoint's directory when it
    /// lives below it.
    pub embeddings: Option<PathBuf>,
    pub runs: Vec<MfRun>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MfRun {
    pub split: SplitConfig,
    pub model: FactorizationModel,
    pub epoch_log: Vec<EpochLog>,
}

impl MfCheckpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut ckpt: MfCheckpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Data(format!("{}: not a factorization checkpoint: {e}", path.display())))?;
        if ckpt.format != MF_FORMAT {
            return Err(Error::Data(format!(
                "{}: unsupported checkpoint format {:?}",
                path.display(),
                ckpt.format
            )));
        }
        if ckpt.runs.is_empty() {
            return Err(Error::Data(format!(
                "{}: checkpoint holds no trained model",
                path.display()
            )));
        }
        for run in &mut ckpt.runs {
            let m = &run.model;
            let consistent = m.d == ckpt.d
                && m.n_user_features() == ckpt.n_user_features
                && m.n_item_features() == ckpt.n_item_features
                && m.item_biases.len() == ckpt.n_item_features
                && m.user_vectors.ncols() == m.d
                && m.item_vectors.ncols() == m.d
                && m.dense_dim() == ckpt.dense_dim
                && m.mode() == ckpt.metadata;
            if !consistent {
                return Err(Error::Data(format!(
                    "{}: parameter shapes disagree with header",
                    path.display()
                )));
            }
            if !m.all_finite() {
                return Err(Error::Numeric(format!("{}: non-finite parameters", path.display())));
            }
            run.model.reset_accumulators();
        }
        Ok(ckpt)
    }
}
