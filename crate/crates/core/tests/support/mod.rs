//! Oracles shared by the test suites and the acceptance report.
#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use tagrec_core::corpus::{split_leave_p_in, Document, InteractionMatrix, SplitConfig};
use tagrec_core::encoder::{
    bce_loss, document_loss_and_gradient, forward_document, labels_from_tags, train_encoder, EncoderConfig,
    EncoderParams, EpochLoss,
};
use tagrec_core::evaluation::{rank_candidates, Mapped};
use tagrec_core::factorization::{FactorizationModel, FeatureSet, MetadataMode, PairLoss, TripletGradient};
use tagrec_core::features::{build_identity_features, DenseItemEmbeddings, FeatureKind, FeatureMatrix};
use tagrec_core::rng;
use tagrec_core::synthetic::TriggerCorpus;

pub const STEP: f64 = 1e-5;
pub const LAMBDA: f64 = 0.01;

/// Central differences carry roundoff of about ε·|L|/h ≈ 1e-11 here, so the
/// denominator is floored at 1e-6 to keep near-zero entries from dominating.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

// ---- encoder ----

pub fn encoder_setup() -> (Document, Vec<f64>, EncoderParams) {
    let cfg = EncoderConfig {
        embed_dim: 4,
        hidden_dim: 3,
        attention_dim: 5,
        n_tags: 4,
        ..EncoderConfig::default()
    };
    let doc = Document {
        item_id: 0,
        sentences: vec![vec![2, 3, 4], vec![5, 2, 1]],
        tag_labels: vec![0, 2],
    };
    let labels = vec![1.0, 0.0, 1.0, 0.0];
    let params = EncoderParams::init_uniform(cfg.dims(6), 1.0, &mut rng::seeded(11));
    (doc, labels, params)
}

fn encoder_loss(doc: &Document, labels: &[f64], params: &EncoderParams) -> f64 {
    bce_loss(&forward_document(doc, params).unwrap().tag_probs, labels)
}

pub struct BlockCheck {
    pub name: &'static str,
    pub worst: f64,
    /// Entries whose analytic gradient exceeds 1e-5.
    pub nonzero: usize,
}

/// Per-block worst relative error of the analytic BCE gradient.
pub fn encoder_gradient_check() -> Vec<BlockCheck> {
    let (doc, labels, params) = encoder_setup();
    let mut grad = params.clone();
    grad.fill(0.0);
    let loss = document_loss_and_gradient(&doc, &labels, &params, &mut grad, 1.0).unwrap();
    assert!((loss - encoder_loss(&doc, &labels, &params)).abs() < 1e-15);
    let names: Vec<&'static str> = params.blocks().iter().map(|(n, _)| *n).collect();
    let analytic: Vec<Vec<f64>> = grad.blocks().iter().map(|(_, b)| b.to_vec()).collect();
    names
        .iter()
        .enumerate()
        .map(|(bi, &name)| {
            let mut worst = 0.0f64;
            let mut nonzero = 0;
            for k in 0..analytic[bi].len() {
                let mut plus = params.clone();
                plus.blocks_mut()[bi].1[k] += STEP;
                let mut minus = params.clone();
                minus.blocks_mut()[bi].1[k] -= STEP;
                let numeric = (encoder_loss(&doc, &labels, &plus) - encoder_loss(&doc, &labels, &minus)) / (2.0 * STEP);
                worst = worst.max(relative_error(analytic[bi][k], numeric));
                if analytic[bi][k].abs() > 1e-5 {
                    nonzero += 1;
                }
            }
            BlockCheck { name, worst, nonzero }
        })
        .collect()
}

// ---- factorization ----

fn sparse(n_items: usize, n_features: usize, rows: Vec<Vec<(u32, f64)>>) -> FeatureMatrix {
    FeatureMatrix {
        n_items,
        n_features,
        rows,
        kind: FeatureKind::Tags,
        has_identity: true,
    }
}

// 3 users with an identity feature plus a shared "group" feature,
// 5 items with identity plus overlapping tag features.
pub fn mf_fixture() -> (FeatureMatrix, FeatureMatrix, DenseItemEmbeddings) {
    let users = sparse(
        3,
        5,
        vec![
            vec![(0, 1.0), (3, 0.5)],
            vec![(1, 1.0), (3, 0.5)],
            vec![(2, 1.0), (4, 0.7)],
        ],
    );
    let items = sparse(
        5,
        8,
        vec![
            vec![(0, 1.0), (5, 0.6)],
            vec![(1, 1.0), (5, 0.6), (6, 0.8)],
            vec![(2, 1.0), (6, 1.0)],
            vec![(3, 1.0), (7, 0.3)],
            vec![(4, 1.0)],
        ],
    );
    let mut r = rng::seeded(99);
    let dense = DenseItemEmbeddings::new(Array2::from_shape_simple_fn((5, 3), || r.gen_range(-1.0..1.0))).unwrap();
    (users, items, dense)
}

pub fn params_mut(m: &mut FactorizationModel) -> Vec<&mut f64> {
    let mut out: Vec<&mut f64> = m.user_vectors.iter_mut().collect();
    out.extend(m.item_vectors.iter_mut());
    out.extend(m.item_biases.iter_mut());
    if let Some(c) = m.dense.as_mut() {
        out.extend(c.bias_weights.iter_mut());
        out.push(&mut c.intercept);
        if let Some(p) = c.factors.as_mut() {
            out.extend(p.iter_mut());
        }
    }
    out
}

// Flattens a sparse triplet gradient into the layout of `params_mut`.
pub fn flatten(m: &FactorizationModel, g: &TripletGradient) -> Vec<f64> {
    let d = m.d;
    let n_uf = m.user_vectors.nrows();
    let n_if = m.item_vectors.nrows();
    let dense_len = m.dense.as_ref().map_or(0, |c| {
        c.bias_weights.len() + 1 + c.factors.as_ref().map_or(0, |p| p.len())
    });
    let mut out = vec![0.0; n_uf * d + n_if * d + n_if + dense_len];
    for (f, v) in &g.user_rows {
        for k in 0..d {
            out[*f as usize * d + k] += v[k];
        }
    }
    let item_base = n_uf * d;
    let bias_base = item_base + n_if * d;
    for (f, v, b) in &g.item_rows {
        for k in 0..d {
            out[item_base + *f as usize * d + k] += v[k];
        }
        out[bias_base + *f as usize] += b;
    }
    let mut at = bias_base + n_if;
    if let Some((w, c)) = &g.dense_bias {
        for &v in w {
            out[at] = v;
            at += 1;
        }
        out[at] = *c;
        at += 1;
    }
    if let Some(p) = &g.dense_factors {
        for &v in p {
            out[at] = v;
            at += 1;
        }
    }
    out
}

/// Worst relative error of the triplet gradient over every parameter and four triplets.
pub fn mf_gradient_check(mode: MetadataMode, loss: PairLoss, seed: u64) -> f64 {
    let (users, items, dense) = mf_fixture();
    let fs = FeatureSet::new(&users, &items, (mode != MetadataMode::None).then_some(&dense));
    let mut r = rng::seeded(seed);
    let dense_dim = (mode != MetadataMode::None).then_some(3);
    let mut model = FactorizationModel::new(4, 5, 8, dense_dim, mode, &mut r).unwrap();
    for p in params_mut(&mut model) {
        *p = r.gen_range(-0.5..0.5);
    }
    let mut worst: f64 = 0.0;
    for (u, pos, neg) in [(0, 1, 2), (1, 0, 3), (2, 4, 1), (0, 2, 1)] {
        let (grad, delta) = model.triplet_gradient(&fs, u, pos, neg, loss, LAMBDA);
        if let PairLoss::Warp { .. } = loss {
            // the hinge has a kink at δ = 1
            assert!((1.0 - delta).abs() > 1e-3);
        }
        let analytic = flatten(&model, &grad);
        for (idx, &a) in analytic.iter().enumerate() {
            let mut plus = model.clone();
            *params_mut(&mut plus)[idx] += STEP;
            let mut minus = model.clone();
            *params_mut(&mut minus)[idx] -= STEP;
            let numeric = (plus.triplet_objective(&fs, u, pos, neg, loss, LAMBDA)
                - minus.triplet_objective(&fs, u, pos, neg, loss, LAMBDA))
                / (2.0 * STEP);
            worst = worst.max(relative_error(a, numeric));
        }
    }
    worst
}

// ---- evaluation ----

/// Random interactions and a score matrix drawn from a few levels so ties are common.
pub fn ranking_instance(seed: u64, max_users: usize, max_items: usize) -> (InteractionMatrix, Array2<f64>) {
    let mut r = rng::seeded(seed);
    let n_users = r.gen_range(2..=max_users);
    let n_items = r.gen_range(5..=max_items);
    let rows = (0..n_users)
        .map(|_| {
            let k = r.gen_range(1..=n_items.min(15));
            rand::seq::index::sample(&mut r, n_items, k)
                .into_iter()
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    let m = InteractionMatrix::from_rows(n_items, rows).unwrap();
    let split = split_leave_p_in(
        &m,
        &SplitConfig {
            p_train_per_user: r.gen_range(1..5),
            rng_seed: seed,
        },
    )
    .unwrap();
    let scores = Array2::from_shape_simple_fn((n_users, n_items), || r.gen_range(0..6) as f64 * 0.5);
    (split, scores)
}

/// Full sort of every candidate, then counting.
pub fn naive_recall(m: &InteractionMatrix, scores: &Array2<f64>, ks: &[usize]) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut per_user = Vec::new();
    for u in 0..m.n_users() {
        let test = m.test_items(u);
        if test.is_empty() {
            continue;
        }
        let mut cands: Vec<usize> = (0..m.n_items())
            .filter(|&i| !m.train_items(u).contains(&(i as u32)))
            .collect();
        cands.sort_by(|&a, &b| scores[[u, b]].partial_cmp(&scores[[u, a]]).unwrap().then(a.cmp(&b)));
        per_user.push(
            ks.iter()
                .map(|&k| {
                    let hits = cands.iter().take(k).filter(|&&i| test.contains(&(i as u32))).count();
                    hits as f64 / test.len() as f64
                })
                .collect::<Vec<f64>>(),
        );
    }
    if per_user.is_empty() {
        return None;
    }
    let mean = (0..ks.len())
        .map(|j| per_user.iter().map(|r| r[j]).sum::<f64>() / per_user.len() as f64)
        .collect();
    Some((mean, per_user))
}

// ---- trigger corpus ----

pub fn trigger_config(epochs: usize) -> EncoderConfig {
    EncoderConfig {
        embed_dim: 16,
        hidden_dim: 8,
        attention_dim: 16,
        n_tags: 4,
        learning_rate: 0.003,
        batch_size: 8,
        epochs,
        seed: 3,
        ..EncoderConfig::default()
    }
}

pub struct TriggerOutcome {
    pub log: Vec<EpochLoss>,
    /// Mean BCE of the trained network over the 8 documents.
    pub final_bce: f64,
    /// Documents whose trigger attention mass beats the uniform share.
    pub above_uniform: usize,
}

pub fn trigger_run(epochs: usize) -> TriggerOutcome {
    let corpus = TriggerCorpus::generate(5);
    let (params, log) = train_encoder(&corpus.documents, corpus.vocab_size, &trigger_config(epochs)).unwrap();
    let docs = &corpus.documents;
    let final_bce = docs
        .iter()
        .map(|d| {
            let f = forward_document(d, &params).unwrap();
            bce_loss(&f.tag_probs, &labels_from_tags(&d.tag_labels, 4))
        })
        .sum::<f64>()
        / docs.len() as f64;
    let mut above_uniform = 0;
    for doc in docs {
        let f = forward_document(doc, &params).unwrap();
        let (mut mass, mut uniform) = (0.0, 0.0);
        for (sentence, alpha) in doc.sentences.iter().zip(&f.word_attention) {
            let hits: Vec<usize> = (0..sentence.len())
                .filter(|&i| TriggerCorpus::is_trigger(sentence[i]))
                .collect();
            mass += hits.iter().map(|&i| alpha[i]).sum::<f64>();
            uniform += hits.len() as f64 / sentence.len() as f64;
        }
        assert!(uniform > 0.0, "every document carries a trigger");
        if mass > uniform {
            above_uniform += 1;
        }
    }
    TriggerOutcome {
        log,
        final_bce,
        above_uniform,
    }
}

// ---- invariance ----

/// A random hybrid model over identity + tag item features; returns whether
/// rankings survive the sigmoid and a global shift of the identity biases.
pub fn invariance_case(seed: u64) -> bool {
    let mut r = rng::seeded(seed);
    let (n_users, n_items, n_tags) = (r.gen_range(3..20), r.gen_range(10..60), r.gen_range(1..6));
    let rows = (0..n_users)
        .map(|_| {
            let k = r.gen_range(2..n_items.min(12));
            rand::seq::index::sample(&mut r, n_items, k)
                .into_iter()
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    let data = InteractionMatrix::from_rows(n_items, rows).unwrap();
    let data = split_leave_p_in(
        &data,
        &SplitConfig {
            p_train_per_user: 1,
            rng_seed: seed,
        },
    )
    .unwrap();
    let users = build_identity_features(n_users).unwrap();
    let items = FeatureMatrix {
        n_items,
        n_features: n_items + n_tags,
        rows: (0..n_items)
            .map(|i| {
                vec![
                    (i as u32, 1.0),
                    ((n_items + r.gen_range(0..n_tags)) as u32, r.gen_range(0.1..1.0)),
                ]
            })
            .collect(),
        kind: FeatureKind::Tags,
        has_identity: true,
    };
    let mode = [MetadataMode::None, MetadataMode::Bias, MetadataMode::BiasFactors][r.gen_range(0..3)];
    let dense =
        DenseItemEmbeddings::new(Array2::from_shape_simple_fn((n_items, 3), || r.gen_range(-1.0..1.0))).unwrap();
    let dense = (mode != MetadataMode::None).then_some(&dense);
    let dense_dim = dense.map(|_| 3);
    let mut model = FactorizationModel::new(4, n_users, n_items + n_tags, dense_dim, mode, &mut r).unwrap();
    for p in params_mut(&mut model) {
        *p = r.gen_range(-1.0..1.0);
    }
    let mut shifted = model.clone();
    let c = r.gen_range(-5.0..5.0);
    for b in shifted.item_biases.iter_mut().take(n_items) {
        *b += c;
    }
    let fs = || FeatureSet::new(&users, &items, dense);
    let raw = model.bind(fs()).unwrap();
    let prob = Mapped {
        inner: model.bind(fs()).unwrap(),
        f: |s: f64| 1.0 / (1.0 + (-s).exp()),
    };
    let moved = shifted.bind(fs()).unwrap();
    (0..n_users).filter(|&u| !data.is_excluded(u)).all(|u| {
        let k = r.gen_range(1..n_items);
        let a = rank_candidates(&raw, u, &data, k).unwrap().ranked_items;
        a == rank_candidates(&prob, u, &data, k).unwrap().ranked_items
            && a == rank_candidates(&moved, u, &data, k).unwrap().ranked_items
    })
}
