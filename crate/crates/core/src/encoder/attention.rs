use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::gru::add_outer;
use super::params::flat;
use crate::{Error, Result};

/// Additive attention: `e_t = uᵀ tanh(W h_t + b)`, `α = softmax(e)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionWeights {
    /// A × 2H
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    /// Context vector, length A.
    pub u: Array1<f64>,
}

impl AttentionWeights {
    pub fn zeros(input: usize, attention: usize) -> Self {
        AttentionWeights {
            w: Array2::zeros((attention, input)),
            b: Array1::zeros(attention),
            u: Array1::zeros(attention),
        }
    }

    pub(crate) fn push_blocks<'a>(&'a self, prefix: &'static str, out: &mut Vec<(&'static str, &'a [f64])>) {
        let names = block_names(prefix);
        out.push((names[0], flat(&self.w)));
        out.push((names[1], flat(&self.b)));
        out.push((names[2], flat(&self.u)));
    }

    pub(crate) fn push_blocks_mut<'a>(
        &'a mut self,
        prefix: &'static str,
        out: &mut Vec<(&'static str, &'a mut [f64])>,
    ) {
        let names = block_names(prefix);
        out.push((names[0], self.w.as_slice_mut().expect("contiguous")));
        out.push((names[1], self.b.as_slice_mut().expect("contiguous")));
        out.push((names[2], self.u.as_slice_mut().expect("contiguous")));
    }
}

fn block_names(prefix: &'static str) -> [&'static str; 3] {
    match prefix {
        "word_attn" => ["word_attn.w", "word_attn.b", "word_attn.u"],
        _ => ["sent_attn.w", "sent_attn.b", "sent_attn.u"],
    }
}

/// Pools `states` into their attention-weighted sum. Positions whose `mask`
/// entry is false get weight exactly 0.
pub fn attention_pool(
    states: &[Vec<f64>],
    mask: Option<&[bool]>,
    attn: &AttentionWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if states.is_empty() {
        return Err(Error::Data("attention over an empty sequence".into()));
    }
    let dim = attn.w.ncols();
    if let Some(bad) = states.iter().find(|s| s.len() != dim) {
        return Err(Error::Dimension(format!(
            "attention expects {dim}-vectors, got {}",
            bad.len()
        )));
    }
    if mask.is_some_and(|m| m.len() != states.len()) {
        return Err(Error::Dimension("mask length differs from sequence length".into()));
    }
    let views: Vec<ArrayView1<f64>> = states.iter().map(|s| ArrayView1::from(s.as_slice())).collect();
    let trace = AttentionTrace::forward(attn, &views, mask)?;
    Ok((trace.context.to_vec(), trace.alpha.to_vec()))
}

pub(crate) struct AttentionTrace {
    /// tanh(W h_t + b) per position.
    pub hidden: Vec<Array1<f64>>,
    pub alpha: Array1<f64>,
    pub context: Array1<f64>,
}

impl AttentionTrace {
    pub fn forward(attn: &AttentionWeights, states: &[ArrayView1<f64>], mask: Option<&[bool]>) -> Result<Self> {
        let hidden: Vec<Array1<f64>> = states
            .iter()
            .map(|h| (attn.w.dot(h) + &attn.b).mapv_into(f64::tanh))
            .collect();
        let scores: Vec<f64> = hidden
            .iter()
            .enumerate()
            .map(|(t, m)| {
                if mask.map_or(true, |mask| mask[t]) {
                    attn.u.dot(m)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let alpha = masked_softmax(&scores)?;
        let mut context = Array1::<f64>::zeros(attn.w.ncols());
        for (a, h) in alpha.iter().zip(states) {
            if *a != 0.0 {
                context.scaled_add(*a, h);
            }
        }
        Ok(AttentionTrace { hidden, alpha, context })
    }

    /// Accumulates gradients into `grad`; returns ∂L/∂h_t for every position.
    pub fn backward(
        &self,
        attn: &AttentionWeights,
        grad: &mut AttentionWeights,
        states: &[ArrayView1<f64>],
        d_context: &Array1<f64>,
    ) -> Vec<Array1<f64>> {
        let d_alpha: Vec<f64> = states.iter().map(|h| d_context.dot(h)).collect();
        let mean: f64 = self.alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
        let mut d_states = Vec::with_capacity(states.len());
        for (t, h) in states.iter().enumerate() {
            let a = self.alpha[t];
            let mut dh = d_context * a;
            if a != 0.0 {
                let de = a * (d_alpha[t] - mean);
                let m = &self.hidden[t];
                grad.u.scaled_add(de, m);
                let dpre = ndarray::Zip::from(&attn.u)
                    .and(m)
                    .map_collect(|&u, &m| de * u * (1.0 - m * m));
                add_outer(&mut grad.w, dpre.view(), h.view());
                grad.b += &dpre;
                dh += &attn.w.t().dot(&dpre);
            }
            d_states.push(dh);
        }
        d_states
    }
}

/// Softmax that treats −∞ scores as masked; fails when everything is masked.
pub(crate) fn masked_softmax(scores: &[f64]) -> Result<Array1<f64>> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Data("every attention position is masked".into()));
    }
    let exps: Array1<f64> = scores
        .iter()
        .map(|&s| if s == f64::NEG_INFINITY { 0.0 } else { (s - max).exp() })
        .collect();
    let total = exps.sum();
    Ok(exps / total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_attn(input: usize, a: usize, seed: u64) -> AttentionWeights {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let mut w = AttentionWeights::zeros(input, a);
        for v in w.w.iter_mut().chain(w.b.iter_mut()).chain(w.u.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0);
        }
        w
    }

    #[test]
    fn identical_states_get_uniform_weights() {
        let attn = random_attn(3, 4, 1);
        let states = vec![vec![0.2, -0.1, 0.7]; 4];
        let (ctx, alpha) = attention_pool(&states, None, &attn).unwrap();
        for a in &alpha {
            assert!((a - 0.25).abs() < 1e-15);
        }
        for (c, s) in ctx.iter().zip(&states[0]) {
            assert!((c - s).abs() < 1e-15);
        }
    }

    #[test]
    fn singleton_returns_its_state() {
        let attn = random_attn(2, 3, 2);
        let (ctx, alpha) = attention_pool(&[vec![1.5, -0.5]], None, &attn).unwrap();
        assert_eq!(alpha, vec![1.0]);
        assert_eq!(ctx, vec![1.5, -0.5]);
    }

    #[test]
    fn hand_set_scores() {
        // A = 1, W = [1 0], b = 0, u = 2 ln 3 gives e = (ln 3, 0).
        let attn = AttentionWeights {
            w: ndarray::array![[1.0, 0.0]],
            b: ndarray::array![0.0],
            u: ndarray::array![2.0 * 3f64.ln()],
        };
        let states = vec![vec![0.5f64.atanh(), 0.0], vec![0.0, 1.0]];
        let (_, alpha) = attention_pool(&states, None, &attn).unwrap();
        assert!((alpha[0] - 0.75).abs() < 1e-12);
        assert!((alpha[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn masked_positions_are_exactly_zero() {
        let attn = random_attn(2, 3, 3);
        let states = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 2.0]];
        let (_, alpha) = attention_pool(&states, Some(&[true, false, true]), &attn).unwrap();
        assert_eq!(alpha[1], 0.0);
        assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(attention_pool(&states, Some(&[false; 3]), &attn).is_err());
        assert!(attention_pool(&[], None, &attn).is_err());
    }
}
