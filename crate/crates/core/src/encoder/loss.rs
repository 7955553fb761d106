/// Probabilities are clamped to `[ε, 1 − ε]` before taking logs.
pub const PROB_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy over tags.
pub fn bce_loss(probs: &[f64], labels: &[f64]) -> f64 {
    debug_assert_eq!(probs.len(), labels.len());
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    total / probs.len() as f64
}

/// Multi-hot label vector of length `n_tags`.
pub fn labels_from_tags(tags: &[u32], n_tags: usize) -> Vec<f64> {
    let mut y = vec![0.0; n_tags];
    for &t in tags {
        if let Some(slot) = y.get_mut(t as usize) {
            *slot = 1.0;
        }
    }
    y
}

/// ∂(mean BCE)/∂logit for sigmoid outputs; zero where the clamp is active.
pub(crate) fn bce_logit_gradient(probs: &[f64], labels: &[f64]) -> Vec<f64> {
    let n = probs.len() as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            if p < PROB_EPSILON || p > 1.0 - PROB_EPSILON {
                0.0
            } else {
                (p - y) / n
            }
        })
        .collect()
}
