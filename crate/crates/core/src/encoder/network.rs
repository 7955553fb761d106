use ndarray::{Array1, ArrayView1};

use super::attention::AttentionTrace;
use super::gru::{add_outer, BiGruTrace};
use super::loss::{bce_logit_gradient, bce_loss};
use super::params::EncoderParams;
use super::sigmoid;
use crate::corpus::Document;
use crate::{Error, Result};

/// Result of running one document through the network.
#[derive(Clone, Debug, PartialEq)]
pub struct DocumentForward {
    pub tag_probs: Vec<f64>,
    pub doc_vec: Vec<f64>,
    /// Word-attention weights per (non-empty) sentence.
    pub word_attention: Vec<Vec<f64>>,
    pub sentence_attention: Vec<f64>,
}

struct SentenceTrace<'a> {
    tokens: &'a [u32],
    gru: BiGruTrace,
    states: Vec<Array1<f64>>,
    attn: AttentionTrace,
}

struct DocTrace<'a> {
    sentences: Vec<SentenceTrace<'a>>,
    gru: BiGruTrace,
    states: Vec<Array1<f64>>,
    attn: AttentionTrace,
    probs: Vec<f64>,
}

fn embed<'p>(params: &'p EncoderParams, tokens: &[u32]) -> Vec<ArrayView1<'p, f64>> {
    tokens.iter().map(|&t| params.word_embeddings.row(t as usize)).collect()
}

fn views(states: &[Array1<f64>]) -> Vec<ArrayView1<'_, f64>> {
    states.iter().map(Array1::view).collect()
}

fn trace<'a>(doc: &'a Document, params: &EncoderParams) -> Result<DocTrace<'a>> {
    let vocab = params.word_embeddings.nrows();
    let mut sentences = Vec::new();
    for tokens in doc.sentences.iter().filter(|s| !s.is_empty()) {
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::Data(format!(
                "item {}: token id {bad} outside vocabulary of {vocab}",
                doc.item_id
            )));
        }
        let xs = embed(params, tokens);
        let gru = BiGruTrace::run(&params.word_gru_fwd, &params.word_gru_bwd, &xs);
        let states = gru.outputs();
        let attn = AttentionTrace::forward(&params.word_attn, &views(&states), None)?;
        sentences.push(SentenceTrace {
            tokens,
            gru,
            states,
            attn,
        });
    }
    if sentences.is_empty() {
        return Err(Error::Data(format!("item {} has an empty document", doc.item_id)));
    }
    let sent_vecs: Vec<ArrayView1<f64>> = sentences.iter().map(|s| s.attn.context.view()).collect();
    let gru = BiGruTrace::run(&params.sent_gru_fwd, &params.sent_gru_bwd, &sent_vecs);
    let states = gru.outputs();
    let attn = AttentionTrace::forward(&params.sent_attn, &views(&states), None)?;
    let head = &params.output_head;
    let probs = (head.w.dot(&attn.context) + &head.b).mapv_into(sigmoid).to_vec();
    Ok(DocTrace {
        sentences,
        gru,
        states,
        attn,
        probs,
    })
}

/// Runs the full network on one document.
pub fn forward_document(doc: &Document, params: &EncoderParams) -> Result<DocumentForward> {
    let t = trace(doc, params)?;
    Ok(DocumentForward {
        word_attention: t.sentences.iter().map(|s| s.attn.alpha.to_vec()).collect(),
        sentence_attention: t.attn.alpha.to_vec(),
        doc_vec: t.attn.context.to_vec(),
        tag_probs: t.probs,
    })
}

pub(crate) fn doc_vector(doc: &Document, params: &EncoderParams) -> Result<Array1<f64>> {
    Ok(trace(doc, params)?.attn.context)
}

/// Mean BCE of `doc` against `labels`; adds `scale · ∂loss/∂θ` into `grad`.
pub fn document_loss_and_gradient(
    doc: &Document,
    labels: &[f64],
    params: &EncoderParams,
    grad: &mut EncoderParams,
    scale: f64,
) -> Result<f64> {
    let t = trace(doc, params)?;
    if labels.len() != t.probs.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} tags",
            labels.len(),
            t.probs.len()
        )));
    }
    let loss = bce_loss(&t.probs, labels);
    let d_logits: Array1<f64> = bce_logit_gradient(&t.probs, labels)
        .into_iter()
        .map(|g| g * scale)
        .collect();

    let doc_vec = &t.attn.context;
    add_outer(&mut grad.output_head.w, d_logits.view(), doc_vec.view());
    grad.output_head.b += &d_logits;
    let d_doc = params.output_head.w.t().dot(&d_logits);

    let sent_states = views(&t.states);
    let d_sent_states = t
        .attn
        .backward(&params.sent_attn, &mut grad.sent_attn, &sent_states, &d_doc);
    let sent_vecs: Vec<ArrayView1<f64>> = t.sentences.iter().map(|s| s.attn.context.view()).collect();
    let d_sent_vecs = t.gru.backward(
        &params.sent_gru_fwd,
        &params.sent_gru_bwd,
        &mut grad.sent_gru_fwd,
        &mut grad.sent_gru_bwd,
        &sent_vecs,
        &d_sent_states,
    );

    for (sent, d_vec) in t.sentences.iter().zip(&d_sent_vecs) {
        let word_states = views(&sent.states);
        let d_word_states = sent
            .attn
            .backward(&params.word_attn, &mut grad.word_attn, &word_states, d_vec);
        let xs = embed(params, sent.tokens);
        let d_xs = sent.gru.backward(
            &params.word_gru_fwd,
            &params.word_gru_bwd,
            &mut grad.word_gru_fwd,
            &mut grad.word_gru_bwd,
            &xs,
            &d_word_states,
        );
        for (&tok, dx) in sent.tokens.iter().zip(&d_xs) {
            grad.word_embeddings.row_mut(tok as usize).scaled_add(1.0, dx);
        }
    }
    Ok(loss)
}
