use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{FactorizationModel, FeatureSet, PairLoss};
use super::warp::{estimated_rank, WarpWeights};
use crate::corpus::InteractionMatrix;
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Bpr,
    Warp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub max_warp_trials: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::Warp,
            epochs: 100,
            learning_rate: 0.05,
            max_warp_trials: 100,
            lambda: 1e-5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_warp_trials == 0 {
            return Err(Error::Config("max_warp_trials must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.lambda >= 0.0) {
            return Err(Error::Config(
                "learning_rate must be positive and lambda non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    /// Parameters changed; carries the triplet's pairwise loss.
    Updated { loss: f64 },
    /// WARP found no violating negative within the trial budget.
    NoViolator,
    /// The user has no candidate negatives.
    Skipped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean pairwise loss over the epoch's train pairs (0 for pairs without an update).
    pub mean_loss: f64,
    pub updates: usize,
}

fn sample_negative<R: Rng>(train: &InteractionMatrix, user: usize, rng: &mut R) -> Option<usize> {
    let n_items = train.n_items();
    if train.train_items(user).len() >= n_items {
        return None;
    }
    loop {
        let j = rng.gen_range(0..n_items);
        if !train.is_train(user, j as u32) {
            return Some(j);
        }
    }
}

fn apply_checked(
    model: &mut FactorizationModel,
    fs: &FeatureSet,
    user: usize,
    pos: usize,
    neg: usize,
    loss: PairLoss,
    cfg: &TrainConfig,
) -> Result<f64> {
    let (grad, delta) = model.triplet_gradient(fs, user, pos, neg, loss, cfg.lambda);
    if !grad.is_finite() || !delta.is_finite() {
        return Err(Error::Numeric(format!(
            "non-finite gradient for triplet (user {user}, pos {pos}, neg {neg})"
        )));
    }
    model.apply_gradient(&grad, cfg.learning_rate);
    Ok(loss.value(delta))
}

/// One SGD step on ln σ(s_pos − s_neg) − λ‖θ‖² with a uniformly sampled negative.
pub fn bpr_step<R: Rng>(
    model: &mut FactorizationModel,
    fs: &FeatureSet,
    train: &InteractionMatrix,
    user: usize,
    pos: usize,
    rng: &mut R,
    cfg: &TrainConfig,
) -> Result<StepOutcome> {
    let Some(neg) = sample_negative(train, user, rng) else {
        return Ok(StepOutcome::Skipped);
    };
    let loss = apply_checked(model, fs, user, pos, neg, PairLoss::Bpr, cfg)?;
    Ok(StepOutcome::Updated { loss })
}

/// One WARP step: draws negatives until one violates the margin
/// (1 + s_neg − s_pos > 0), then applies the hinge gradient weighted by Φ(⌊C/n⌋).
pub fn warp_step<R: Rng>(
    model: &mut FactorizationModel,
    fs: &FeatureSet,
    train: &InteractionMatrix,
    user: usize,
    pos: usize,
    rng: &mut R,
    cfg: &TrainConfig,
    weights: &WarpWeights,
) -> Result<StepOutcome> {
    let candidates = train.n_items() - train.train_items(user).len();
    if candidates == 0 {
        return Ok(StepOutcome::Skipped);
    }
    let q = model.user_representation(fs, user);
    let (p_pos, b_pos) = model.item_representation(fs, pos);
    let s_pos = q.dot(&p_pos) + b_pos;
    for trial in 1..=cfg.max_warp_trials {
        let neg = sample_negative(train, user, rng).expect("candidates exist");
        let (p_neg, b_neg) = model.item_representation(fs, neg);
        let s_neg = q.dot(&p_neg) + b_neg;
        if 1.0 + s_neg - s_pos > 0.0 {
            let weight = weights.phi(estimated_rank(candidates, trial));
            let loss = apply_checked(model, fs, user, pos, neg, PairLoss::Warp { weight }, cfg)?;
            return Ok(StepOutcome::Updated { loss });
        }
    }
    Ok(StepOutcome::NoViolator)
}

/// Runs `cfg.epochs` passes over the shuffled train-tagged pairs.
pub fn train(
    model: &mut FactorizationModel,
    interactions: &InteractionMatrix,
    fs: &FeatureSet,
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    model.check_features(fs)?;
    if fs.n_users() != interactions.n_users() || fs.n_items() != interactions.n_items() {
        return Err(Error::Dimension(format!(
            "features cover {} users × {} items, interactions {} × {}",
            fs.n_users(),
            fs.n_items(),
            interactions.n_users(),
            interactions.n_items()
        )));
    }
    let weights = WarpWeights::new(interactions.n_items());
    let mut rng = rng::substream(cfg.seed, 2);
    let mut pairs = interactions.train_pairs();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        let mut updates = 0;
        for (step, &(u, i)) in pairs.iter().enumerate() {
            let (u, i) = (u as usize, i as usize);
            let outcome = match cfg.loss {
                LossKind::Bpr => bpr_step(model, fs, interactions, u, i, &mut rng, cfg),
                LossKind::Warp => warp_step(model, fs, interactions, u, i, &mut rng, cfg, &weights),
            }
            .map_err(|e| Error::Numeric(format!("epoch {epoch}, step {step}: {e}")))?;
            if let StepOutcome::Updated { loss } = outcome {
                total += loss;
                updates += 1;
            }
        }
        if !model.all_finite() {
            return Err(Error::Numeric(format!("non-finite parameters after epoch {epoch}")));
        }
        let mean_loss = if pairs.is_empty() {
            0.0
        } else {
            total / pairs.len() as f64
        };
        log::debug!("mf epoch {epoch}: mean loss {mean_loss:.6}, {updates} updates");
        log.push(EpochLog {
            epoch,
            mean_loss,
            updates,
        });
    }
    Ok(log)
}
