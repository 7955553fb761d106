use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::AttentionWeights;
use super::gru::GruWeights;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputHead {
    /// T × 2H
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Every weight of the network. Also used, zero-filled, as the gradient buffer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// V × E
    pub word_embeddings: Array2<f64>,
    pub word_gru_fwd: GruWeights,
    pub word_gru_bwd: GruWeights,
    pub word_attn: AttentionWeights,
    pub sent_gru_fwd: GruWeights,
    pub sent_gru_bwd: GruWeights,
    pub sent_attn: AttentionWeights,
    pub output_head: OutputHead,
}

/// Shape of a network: vocabulary V, embedding E, hidden H, attention A, tags T.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
    pub attention: usize,
    pub tags: usize,
}

impl EncoderParams {
    pub fn zeros(d: Dims) -> Self {
        let h2 = 2 * d.hidden;
        EncoderParams {
            word_embeddings: Array2::zeros((d.vocab, d.embed)),
            word_gru_fwd: GruWeights::zeros(d.embed, d.hidden),
            word_gru_bwd: GruWeights::zeros(d.embed, d.hidden),
            word_attn: AttentionWeights::zeros(h2, d.attention),
            sent_gru_fwd: GruWeights::zeros(h2, d.hidden),
            sent_gru_bwd: GruWeights::zeros(h2, d.hidden),
            sent_attn: AttentionWeights::zeros(h2, d.attention),
            output_head: OutputHead {
                w: Array2::zeros((d.tags, h2)),
                b: Array1::zeros(d.tags),
            },
        }
    }

    /// Every entry drawn from uniform(−range, range).
    pub fn init_uniform<R: Rng>(d: Dims, range: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(d);
        let dist = Uniform::new_inclusive(-range, range);
        for (_, block) in p.blocks_mut() {
            for v in block.iter_mut() {
                *v = dist.sample(rng);
            }
        }
        p
    }

    pub fn dims(&self) -> Dims {
        Dims {
            vocab: self.word_embeddings.nrows(),
            embed: self.word_embeddings.ncols(),
            hidden: self.word_gru_fwd.hidden(),
            attention: self.word_attn.w.nrows(),
            tags: self.output_head.b.len(),
        }
    }

    pub fn doc_dim(&self) -> usize {
        2 * self.dims().hidden
    }

    /// Named flat views of every parameter block, in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        let mut out = vec![("word_embeddings", flat(&self.word_embeddings))];
        self.word_gru_fwd.push_blocks("word_gru_fwd", &mut out);
        self.word_gru_bwd.push_blocks("word_gru_bwd", &mut out);
        self.word_attn.push_blocks("word_attn", &mut out);
        self.sent_gru_fwd.push_blocks("sent_gru_fwd", &mut out);
        self.sent_gru_bwd.push_blocks("sent_gru_bwd", &mut out);
        self.sent_attn.push_blocks("sent_attn", &mut out);
        out.push(("output_head.w", flat(&self.output_head.w)));
        out.push(("output_head.b", self.output_head.b.as_slice().expect("contiguous")));
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out = vec![(
            "word_embeddings",
            self.word_embeddings.as_slice_mut().expect("contiguous"),
        )];
        self.word_gru_fwd.push_blocks_mut("word_gru_fwd", &mut out);
        self.word_gru_bwd.push_blocks_mut("word_gru_bwd", &mut out);
        self.word_attn.push_blocks_mut("word_attn", &mut out);
        self.sent_gru_fwd.push_blocks_mut("sent_gru_fwd", &mut out);
        self.sent_gru_bwd.push_blocks_mut("sent_gru_bwd", &mut out);
        self.sent_attn.push_blocks_mut("sent_attn", &mut out);
        let OutputHead { w, b } = &mut self.output_head;
        out.push(("output_head.w", w.as_slice_mut().expect("contiguous")));
        out.push(("output_head.b", b.as_slice_mut().expect("contiguous")));
        out
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn fill(&mut self, value: f64) {
        for (_, block) in self.blocks_mut() {
            block.fill(value);
        }
    }

    /// `self += other`, block by block.
    pub fn add_assign(&mut self, other: &EncoderParams) {
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, block) in self.blocks_mut() {
            for v in block.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|v| v.is_finite()))
    }

    /// Checks that every block has the shape implied by the embedding table,
    /// the word GRU and the output head.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let expected = Self::zeros(d);
        for ((name, a), (_, b)) in self.blocks().iter().zip(expected.blocks()) {
            if a.len() != b.len() {
                return Err(Error::Dimension(format!(
                    "block {name} has {} entries, expected {}",
                    a.len(),
                    b.len()
                )));
            }
        }
        let shapes_ok = self.word_gru_fwd.shape_matches(&expected.word_gru_fwd)
            && self.word_gru_bwd.shape_matches(&expected.word_gru_bwd)
            && self.sent_gru_fwd.shape_matches(&expected.sent_gru_fwd)
            && self.sent_gru_bwd.shape_matches(&expected.sent_gru_bwd)
            && self.word_attn.w.dim() == expected.word_attn.w.dim()
            && self.sent_attn.w.dim() == expected.sent_attn.w.dim()
            && self.output_head.w.dim() == expected.output_head.w.dim();
        if !shapes_ok {
            return Err(Error::Dimension("encoder weight shapes are inconsistent".into()));
        }
        if !self.all_finite() {
            return Err(Error::Numeric("encoder weights contain non-finite values".into()));
        }
        Ok(())
    }
}

pub(crate) fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored in standard layout")
}
