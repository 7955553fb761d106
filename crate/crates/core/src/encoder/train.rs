use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::labels_from_tags;
use super::network::{doc_vector, document_loss_and_gradient};
use super::params::{Dims, EncoderParams};
use crate::corpus::Document;
use crate::features::DenseItemEmbeddings;
use crate::{rng, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderConfig {
    pub max_sentences: usize,
    pub max_words: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub attention_dim: usize,
    pub n_tags: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub init_range: f64,
    pub seed: u64,
    /// Worker partitions per batch. Results are deterministic for a fixed
    /// seed and thread count; 1 is the reference mode.
    pub threads: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            max_sentences: 10,
            max_words: 50,
            embed_dim: 100,
            hidden_dim: 50,
            attention_dim: 100,
            n_tags: 300,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 64,
            epochs: 10,
            init_range: 0.05,
            seed: 7,
            threads: 1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_sentences", self.max_sentences),
            ("max_words", self.max_words),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("attention_dim", self.attention_dim),
            ("n_tags", self.n_tags),
            ("batch_size", self.batch_size),
            ("threads", self.threads),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("encoder.{name} must be positive")));
        }
        let rates_ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.adam_epsilon > 0.0
            && self.init_range > 0.0;
        if !rates_ok {
            return Err(Error::Config("encoder optimizer settings out of range".into()));
        }
        Ok(())
    }

    pub fn dims(&self, vocab_size: usize) -> Dims {
        Dims {
            vocab: vocab_size,
            embed: self.embed_dim,
            hidden: self.hidden_dim,
            attention: self.attention_dim,
            tags: self.n_tags,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean BCE over the epoch's training documents, measured before each update.
    pub mean_loss: f64,
}

struct Adam {
    m: EncoderParams,
    v: EncoderParams,
    step: i32,
}

impl Adam {
    fn new(like: &EncoderParams) -> Self {
        let mut m = like.clone();
        m.fill(0.0);
        Adam {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    fn update(&mut self, params: &mut EncoderParams, grad: &EncoderParams, cfg: &EncoderConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let blocks = params
            .blocks_mut()
            .into_iter()
            .zip(grad.blocks())
            .zip(self.m.blocks_mut())
            .zip(self.v.blocks_mut());
        for ((((_, p), (_, g)), (_, m)), (_, v)) in blocks {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

/// Trains the network on documents that carry at least one tag label.
///
/// Labels must already be tag-vocabulary indices below `cfg.n_tags`.
pub fn train_encoder(
    docs: &[Document],
    vocab_size: usize,
    cfg: &EncoderConfig,
) -> Result<(EncoderParams, Vec<EpochLoss>)> {
    cfg.validate()?;
    let mut params =
        EncoderParams::init_uniform(cfg.dims(vocab_size), cfg.init_range, &mut rng::substream(cfg.seed, 0));
    let training: Vec<(&Document, Vec<f64>)> = docs
        .iter()
        .filter(|d| !d.tag_labels.is_empty() && !d.is_empty())
        .map(|d| {
            if let Some(&bad) = d.tag_labels.iter().find(|&&t| t as usize >= cfg.n_tags) {
                return Err(Error::Data(format!(
                    "item {} has tag index {bad} but the encoder predicts {} tags",
                    d.item_id, cfg.n_tags
                )));
            }
            Ok((d, labels_from_tags(&d.tag_labels, cfg.n_tags)))
        })
        .collect::<Result<_>>()?;
    if cfg.epochs > 0 && training.is_empty() {
        return Err(Error::Data("no document carries a tag from the vocabulary".into()));
    }

    let mut shuffle_rng = rng::substream(cfg.seed, 1);
    let mut adam = Adam::new(&params);
    let mut grad = params.clone();
    let mut order: Vec<usize> = (0..training.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    let pool = (cfg.threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build())
        .transpose()
        .map_err(|e| Error::Config(format!("cannot start encoder worker pool: {e}")))?;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            grad.fill(0.0);
            let batch_loss = match &pool {
                None => {
                    let mut total = 0.0;
                    for &i in batch {
                        let (doc, labels) = &training[i];
                        total += document_loss_and_gradient(doc, labels, &params, &mut grad, scale)?;
                    }
                    total
                }
                Some(pool) => {
                    // contiguous partitions, reduced in partition order
                    let part = batch.len().div_ceil(cfg.threads);
                    let partials: Vec<Result<(EncoderParams, f64)>> = pool.install(|| {
                        batch
                            .par_chunks(part)
                            .map(|chunk| {
                                let mut g = grad.clone();
                                let mut total = 0.0;
                                for &i in chunk {
                                    let (doc, labels) = &training[i];
                                    total += document_loss_and_gradient(doc, labels, &params, &mut g, scale)?;
                                }
                                Ok((g, total))
                            })
                            .collect()
                    });
                    let mut total = 0.0;
                    for partial in partials {
                        let (g, l) = partial?;
                        grad.add_assign(&g);
                        total += l;
                    }
                    total
                }
            };
            if !batch_loss.is_finite() || !grad.all_finite() {
                return Err(Error::Numeric(format!(
                    "encoder diverged at epoch {epoch}, batch {batch_no} (batch loss {batch_loss})"
                )));
            }
            epoch_loss += batch_loss;
            adam.update(&mut params, &grad, cfg);
            if !params.all_finite() {
                return Err(Error::Numeric(format!(
                    "encoder parameters became non-finite at epoch {epoch}, batch {batch_no}"
                )));
            }
        }
        let mean_loss = epoch_loss / training.len() as f64;
        log::info!("encoder epoch {epoch}: mean BCE {mean_loss:.6}");
        log.push(EpochLoss { epoch, mean_loss });
    }
    Ok((params, log))
}

/// Pooled document vector for every item in `0..n_items`. Items without a
/// document or without any token get the zero vector.
pub fn export_embeddings(docs: &[Document], n_items: usize, params: &EncoderParams) -> Result<DenseItemEmbeddings> {
    let dim = params.doc_dim();
    let mut by_item: Vec<Option<&Document>> = vec![None; n_items];
    for doc in docs {
        let slot = by_item
            .get_mut(doc.item_id as usize)
            .ok_or_else(|| Error::Data(format!("document for item {} beyond {n_items} items", doc.item_id)))?;
        *slot = Some(doc);
    }
    let rows: Vec<Option<ndarray::Array1<f64>>> = by_item
        .par_iter()
        .map(|doc| match doc {
            Some(d) if !d.is_empty() => doc_vector(d, params).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let mut vectors = Array2::zeros((n_items, dim));
    let mut missing = 0usize;
    for (j, row) in rows.into_iter().enumerate() {
        match row {
            Some(v) => vectors.row_mut(j).assign(&v),
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::warn!("{missing} items have no text; they get zero embeddings");
    }
    DenseItemEmbeddings::new(vectors)
}
