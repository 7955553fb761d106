mod support;

use ndarray::Array2;
use proptest::prelude::*;
use support::{naive_recall, ranking_instance};
use tagrec_core::corpus::{split_leave_p_in, InteractionMatrix, SplitConfig};
use tagrec_core::evaluation::{evaluate, rank_candidates, ConstantScorer, Mapped, RecallReport, ScoreMatrix};
use tagrec_core::rng;

#[test]
fn evaluate_matches_naive_oracle() {
    let ks = [1, 3, 10, 25];
    let mut checked = 0;
    for seed in 0..20 {
        let (m, scores) = ranking_instance(seed, 50, 100);
        let (mean, per_user) = naive_recall(&m, &scores, &ks).expect("instances have evaluable users");
        let report = evaluate(&ScoreMatrix(scores), &m, &ks).unwrap();
        assert_eq!(report.mean, mean, "seed {seed}");
        assert_eq!(report.per_user, per_user, "seed {seed}");
        checked += 1;
    }
    assert_eq!(checked, 20);
}

#[test]
fn three_user_brute_force() {
    // u0: train {0}, test {1, 2}; u1: train {3}, test {0}; u2: train {1, 2}, no test
    let m = InteractionMatrix::from_rows(4, vec![vec![0, 1, 2], vec![0, 3], vec![1, 2]]).unwrap();
    let split = split_leave_p_in(
        &m,
        &SplitConfig {
            p_train_per_user: 2,
            rng_seed: 0,
        },
    )
    .unwrap();
    let scores =
        Array2::from_shape_vec((3, 4), vec![0.0, 0.9, 0.1, 0.5, 0.3, 0.2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
    let (mean, per_user) = naive_recall(&split, &scores, &[1, 2]).unwrap();
    let report = evaluate(&ScoreMatrix(scores), &split, &[1, 2]).unwrap();
    assert_eq!(report.mean, mean);
    assert_eq!(report.per_user, per_user);
    assert_eq!(report.excluded, split.n_excluded());
}

#[test]
fn worker_count_does_not_change_the_report() {
    let (m, scores) = ranking_instance(99, 50, 100);
    let scorer = ScoreMatrix(scores);
    let run = |threads: usize| -> RecallReport {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| evaluate(&scorer, &m, &[5, 20]).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn constant_scores_give_chance_recall() {
    // 200 users × 400 items, 20 interactions each: 10 train, 10 test
    let mut r = rng::seeded(12);
    let rows = (0..200)
        .map(|_| {
            rand::seq::index::sample(&mut r, 400, 20)
                .into_iter()
                .map(|i| i as u32)
                .collect()
        })
        .collect();
    let m = InteractionMatrix::from_rows(400, rows).unwrap();
    let split = split_leave_p_in(
        &m,
        &SplitConfig {
            p_train_per_user: 10,
            rng_seed: 3,
        },
    )
    .unwrap();
    let k = 39;
    let report = evaluate(&ConstantScorer { n_items: 400 }, &split, &[k]).unwrap();
    // a random split puts each test item at a uniform position among the 390 candidates
    let expected = k as f64 / 390.0;
    let var_user = expected * (1.0 - expected) / 10.0 * (390.0 - 10.0) / (390.0 - 1.0);
    let sigma = (var_user / 200.0).sqrt();
    assert!(
        (report.mean[0] - expected).abs() < 3.0 * sigma,
        "{} vs {expected} ± {}",
        report.mean[0],
        3.0 * sigma
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recall_is_monotone_in_k(seed in 0u64..10_000) {
        let (m, scores) = ranking_instance(seed, 20, 40);
        let ks = [1, 2, 5, 10, 20, 40];
        if let Ok(report) = evaluate(&ScoreMatrix(scores), &m, &ks) {
            for row in &report.per_user {
                prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(row.iter().all(|r| (0.0..=1.0).contains(r)));
            }
        }
    }

    #[test]
    fn increasing_transforms_keep_rankings(seed in 0u64..10_000, scale in 0.1f64..5.0, shift in -3.0f64..3.0) {
        let (m, scores) = ranking_instance(seed, 20, 40);
        let raw = ScoreMatrix(scores.clone());
        let squashed = Mapped { inner: ScoreMatrix(scores), f: move |s: f64| 1.0 / (1.0 + (-(scale * s + shift)).exp()) };
        for u in (0..m.n_users()).filter(|&u| !m.is_excluded(u)) {
            let a = rank_candidates(&raw, u, &m, 10).unwrap();
            let b = rank_candidates(&squashed, u, &m, 10).unwrap();
            prop_assert_eq!(a.ranked_items, b.ranked_items);
        }
    }

    #[test]
    fn model_rankings_survive_sigmoid_and_bias_shift(seed in 0u64..1_000_000) {
        prop_assert!(support::invariance_case(seed));
    }

    #[test]
    fn rankings_exclude_train_items(seed in 0u64..10_000, k in 1usize..60) {
        let (m, scores) = ranking_instance(seed, 10, 40);
        let s = ScoreMatrix(scores);
        for u in (0..m.n_users()).filter(|&u| !m.is_excluded(u)) {
            let r = rank_candidates(&s, u, &m, k).unwrap();
            let n_cands = m.n_items() - m.train_items(u).len();
            prop_assert_eq!(r.ranked_items.len(), k.min(n_cands));
            prop_assert!(r.ranked_items.iter().all(|i| !m.is_train(u, *i)));
            prop_assert!(r.scores.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
