use ndarray::Array2;
use tagrec_core::corpus::InteractionMatrix;
use tagrec_core::factorization::{
    train, warp_step, FactorizationModel, FeatureSet, LossKind, MetadataMode, StepOutcome, TrainConfig, WarpWeights,
};
use tagrec_core::features::{build_identity_features, FeatureKind, FeatureMatrix};
use tagrec_core::{rng, Error};

fn identity_model(d: usize, n_users: usize, n_items: usize, seed: u64) -> FactorizationModel {
    FactorizationModel::new(d, n_users, n_items, None, MetadataMode::None, &mut rng::seeded(seed)).unwrap()
}

fn cfg(loss: LossKind, epochs: usize, lambda: f64) -> TrainConfig {
    TrainConfig {
        loss,
        epochs,
        lambda,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_keeps_initialization() {
    let m = InteractionMatrix::from_rows(4, vec![vec![0, 1], vec![2]]).unwrap();
    let (uf, itf) = (build_identity_features(2).unwrap(), build_identity_features(4).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let init = identity_model(3, 2, 4, 1);
    let mut model = init.clone();
    let log = train(&mut model, &m, &fs, &cfg(LossKind::Warp, 0, 1e-5)).unwrap();
    assert!(log.is_empty());
    assert_eq!(model, init);
}

#[test]
fn bpr_separates_tiny_toy() {
    let m = InteractionMatrix::from_rows(3, vec![vec![0], vec![1, 2]]).unwrap();
    let (uf, itf) = (build_identity_features(2).unwrap(), build_identity_features(3).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(4, 2, 3, 2);
    train(&mut model, &m, &fs, &cfg(LossKind::Bpr, 50, 0.0)).unwrap();
    // every (user, positive, negative) triplet
    let (mut correct, mut total) = (0, 0);
    for u in 0..2 {
        for &p in m.row(u) {
            for n in (0..3u32).filter(|n| !m.row(u).contains(n)) {
                total += 1;
                if model.score(&fs, u, p as usize).unwrap() > model.score(&fs, u, n as usize).unwrap() {
                    correct += 1;
                }
            }
        }
    }
    let auc = correct as f64 / total as f64;
    assert!(auc > 0.9, "AUC {auc}");
}

#[test]
fn warp_ranks_positives_first_on_toy() {
    let rows = vec![vec![0, 1], vec![1, 2], vec![3, 4], vec![4, 5]];
    let m = InteractionMatrix::from_rows(6, rows).unwrap();
    let (uf, itf) = (build_identity_features(4).unwrap(), build_identity_features(6).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(4, 4, 6, 3);
    train(&mut model, &m, &fs, &cfg(LossKind::Warp, 200, 1e-5)).unwrap();
    for u in 0..4 {
        let scores: Vec<f64> = (0..6).map(|i| model.score(&fs, u, i).unwrap()).collect();
        let worst_pos = m
            .row(u)
            .iter()
            .map(|&i| scores[i as usize])
            .fold(f64::INFINITY, f64::min);
        let best_neg = (0..6u32)
            .filter(|i| !m.row(u).contains(i))
            .map(|i| scores[i as usize])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(worst_pos > best_neg, "user {u}: {scores:?}");
    }
}

#[test]
fn warp_without_violator_leaves_model_untouched() {
    let m = InteractionMatrix::from_rows(4, vec![vec![0]]).unwrap();
    let (uf, itf) = (build_identity_features(1).unwrap(), build_identity_features(4).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(2, 1, 4, 4);
    model.item_biases[0] = 10.0;
    let before = model.clone();
    let c = cfg(LossKind::Warp, 1, 1e-5);
    let out = warp_step(&mut model, &fs, &m, 0, 0, &mut rng::seeded(0), &c, &WarpWeights::new(4)).unwrap();
    assert_eq!(out, StepOutcome::NoViolator);
    assert_eq!(model, before);
}

#[test]
fn no_train_pairs_means_no_updates() {
    let m = InteractionMatrix::from_rows(3, vec![vec![], vec![]]).unwrap();
    let (uf, itf) = (build_identity_features(2).unwrap(), build_identity_features(3).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let init = identity_model(2, 2, 3, 6);
    for loss in [LossKind::Bpr, LossKind::Warp] {
        let mut model = init.clone();
        let log = train(&mut model, &m, &fs, &cfg(loss, 5, 0.1)).unwrap();
        assert_eq!(model, init);
        assert!(log.iter().all(|e| e.updates == 0));
    }
}

#[test]
fn identity_features_reduce_to_plain_factorization() {
    let (uf, itf) = (build_identity_features(3).unwrap(), build_identity_features(5).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(4, 3, 5, 7);
    for (j, b) in model.item_biases.iter_mut().enumerate() {
        *b = 0.1 * j as f64 - 0.2;
    }
    for u in 0..3 {
        for i in 0..5 {
            let direct: f64 = (0..4)
                .map(|k| model.user_vectors[[u, k]] * model.item_vectors[[i, k]])
                .sum::<f64>()
                + model.item_biases[i];
            assert!((model.score(&fs, u, i).unwrap() - direct).abs() < 1e-12);
        }
    }
}

#[test]
fn weighted_features_sum_their_vectors() {
    let users = build_identity_features(1).unwrap();
    let items = FeatureMatrix {
        n_items: 2,
        n_features: 4,
        rows: vec![vec![(0, 1.0), (2, 0.5), (3, 2.0)], vec![(1, 1.0), (3, 1.0)]],
        kind: FeatureKind::Tags,
        has_identity: true,
    };
    let fs = FeatureSet::new(&users, &items, None);
    let mut model = identity_model(2, 1, 4, 8);
    model.user_vectors = Array2::from_shape_vec((1, 2), vec![1.0, -1.0]).unwrap();
    model.item_vectors = Array2::from_shape_vec((4, 2), vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0, 0.5, -0.5]).unwrap();
    model.item_biases = ndarray::arr1(&[0.1, 0.2, 0.3, 0.4]);
    // item 0: p = (1,0) + 0.5·(2,2) + 2·(0.5,-0.5) = (3, 0); b = 0.1 + 0.15 + 0.8
    assert!((model.score(&fs, 0, 0).unwrap() - (3.0 + 1.05)).abs() < 1e-12);
    // item 1: p = (0,1) + (0.5,-0.5) = (0.5, 0.5); b = 0.2 + 0.4
    assert!((model.score(&fs, 0, 1).unwrap() - 0.6).abs() < 1e-12);
}

#[test]
fn same_seed_same_model() {
    let m = InteractionMatrix::from_rows(6, vec![vec![0, 1], vec![2, 3], vec![4]]).unwrap();
    let (uf, itf) = (build_identity_features(3).unwrap(), build_identity_features(6).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    for loss in [LossKind::Bpr, LossKind::Warp] {
        let mut a = identity_model(3, 3, 6, 9);
        let mut b = identity_model(3, 3, 6, 9);
        let la = train(&mut a, &m, &fs, &cfg(loss, 7, 1e-5)).unwrap();
        let lb = train(&mut b, &m, &fs, &cfg(loss, 7, 1e-5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }
}

#[test]
fn non_finite_parameters_abort_training() {
    let m = InteractionMatrix::from_rows(3, vec![vec![0]]).unwrap();
    let (uf, itf) = (build_identity_features(1).unwrap(), build_identity_features(3).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(2, 1, 3, 10);
    model.user_vectors[[0, 0]] = f64::NAN;
    match train(&mut model, &m, &fs, &cfg(LossKind::Bpr, 3, 1e-5)) {
        Err(Error::Numeric(msg)) => assert!(msg.contains("epoch 0"), "{msg}"),
        other => panic!("expected a numeric error, got {other:?}"),
    }
}

#[test]
fn feature_space_mismatch_is_rejected() {
    let m = InteractionMatrix::from_rows(3, vec![vec![0]]).unwrap();
    let (uf, itf) = (build_identity_features(1).unwrap(), build_identity_features(3).unwrap());
    let fs = FeatureSet::new(&uf, &itf, None);
    let mut model = identity_model(2, 1, 4, 11);
    assert!(train(&mut model, &m, &fs, &cfg(LossKind::Bpr, 1, 1e-5)).is_err());
}
