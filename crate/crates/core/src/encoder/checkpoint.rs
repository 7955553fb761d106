use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EncoderConfig, EncoderParams, EpochLoss};
use crate::corpus::{TagVocabulary, WordVocabulary};
use crate::{Error, Result};

pub const ENCODER_FORMAT: &str = "tagrec-encoder/1";

/// Everything needed to re-run the encoder on new text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderCheckpoint {
    pub format: String,
    pub config: EncoderConfig,
    pub word_vocabulary: WordVocabulary,
    pub tag_vocabulary: TagVocabulary,
    pub params: EncoderParams,
    pub epoch_log: Vec<EpochLoss>,
}

impl EncoderCheckpoint {
    pub fn new(
        config: EncoderConfig,
        word_vocabulary: WordVocabulary,
        tag_vocabulary: TagVocabulary,
        params: EncoderParams,
        epoch_log: Vec<EpochLoss>,
    ) -> Self {
        EncoderCheckpoint {
            format: ENCODER_FORMAT.into(),
            config,
            word_vocabulary,
            tag_vocabulary,
            params,
            epoch_log,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, self).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: EncoderCheckpoint = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Data(format!("{}: not an encoder checkpoint: {e}", path.display())))?;
        if ckpt.format != ENCODER_FORMAT {
            return Err(Error::Data(format!(
                "{}: unsupported checkpoint format {:?}",
                path.display(),
                ckpt.format
            )));
        }
        ckpt.params.validate()?;
        let dims = ckpt.params.dims();
        if dims.tags != ckpt.config.n_tags || dims.tags != ckpt.tag_vocabulary.len() {
            return Err(Error::Data(format!(
                "{}: output head predicts {} tags but config says {} and the vocabulary has {}",
                path.display(),
                dims.tags,
                ckpt.config.n_tags,
                ckpt.tag_vocabulary.len()
            )));
        }
        if dims.vocab != ckpt.word_vocabulary.size() {
            return Err(Error::Data(format!(
                "{}: embedding table has {} rows for a vocabulary of {}",
                path.display(),
                dims.vocab,
                ckpt.word_vocabulary.size()
            )));
        }
        Ok(ckpt)
    }
}
