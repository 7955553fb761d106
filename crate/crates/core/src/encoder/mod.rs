//! Hierarchical attention network for multi-label tag prediction.
//!
//! Words are embedded and read by a bidirectional GRU; an attention pool over
//! its states gives one vector per sentence. A second bidirectional GRU and
//! attention pool over the sentence vectors give the document vector, which a
//! sigmoid output layer maps to per-tag probabilities. After training, the
//! document vector is the item's tag-aware embedding.

mod attention;
mod checkpoint;
mod gru;
mod loss;
mod network;
mod params;
mod train;

pub use attention::{attention_pool, AttentionWeights};
pub use checkpoint::{EncoderCheckpoint, ENCODER_FORMAT};
pub use gru::{gru_cell_forward, GruWeights};
pub use loss::{bce_loss, labels_from_tags, PROB_EPSILON};
pub use network::{document_loss_and_gradient, forward_document, DocumentForward};
pub use params::{EncoderParams, OutputHead};
pub use train::{export_embeddings, train_encoder, EncoderConfig, EpochLoss};

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
