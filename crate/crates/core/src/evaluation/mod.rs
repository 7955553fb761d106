//! Candidate ranking, Recall@K and model comparison.

mod report;
mod ttest;

pub use report::{ComparisonReport, ComparisonRow};
pub use ttest::{paired_ttest, TTest};

use std::cmp::Ordering;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::InteractionMatrix;
use crate::{rng, Error, Result};

pub const DEFAULT_KS: [usize; 4] = [50, 100, 150, 200];

/// Anything that assigns a score to every item for a given user.
pub trait Scorer: Sync {
    fn n_items(&self) -> usize;
    /// Writes the score of every item into `out` (length `n_items()`).
    fn score_items(&self, user: usize, out: &mut [f64]);
}

/// A dense user × item score table.
#[derive(Clone, Debug)]
pub struct ScoreMatrix(pub Array2<f64>);

impl Scorer for ScoreMatrix {
    fn n_items(&self) -> usize {
        self.0.ncols()
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(self.0.row(user)) {
            *o = *s;
        }
    }
}

/// Applies `f` to every score of the wrapped scorer.
pub struct Mapped<S, F> {
    pub inner: S,
    pub f: F,
}

impl<S: Scorer, F: Fn(f64) -> f64 + Sync> Scorer for Mapped<S, F> {
    fn n_items(&self) -> usize {
        self.inner.n_items()
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        self.inner.score_items(user, out);
        for s in out.iter_mut() {
            *s = (self.f)(*s);
        }
    }
}

/// Scores every item identically.
pub struct ConstantScorer {
    pub n_items: usize,
}

impl Scorer for ConstantScorer {
    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score_items(&self, _user: usize, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Independent uniform scores per user, reproducible from `seed`.
pub struct RandomScorer {
    pub n_items: usize,
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score_items(&self, user: usize, out: &mut [f64]) {
        let mut r = rng::substream(self.seed, user as u64);
        for s in out.iter_mut() {
            *s = r.gen();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub user: usize,
    pub ranked_items: Vec<u32>,
    pub scores: Vec<f64>,
}

fn by_score_then_id(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
}

/// Top-`k` items of `user` among those not train-tagged, without checking
/// that the user has held-out items.
pub fn top_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    interactions: &InteractionMatrix,
    k: usize,
) -> Result<RankingResult> {
    if user >= interactions.n_users() {
        return Err(Error::Data(format!(
            "user {user} out of range (n_users = {})",
            interactions.n_users()
        )));
    }
    if scorer.n_items() != interactions.n_items() {
        return Err(Error::Dimension(format!(
            "scorer covers {} items, interactions {}",
            scorer.n_items(),
            interactions.n_items()
        )));
    }
    let mut scores = vec![0.0; scorer.n_items()];
    scorer.score_items(user, &mut scores);
    if let Some(j) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Numeric(format!("NaN score for user {user}, item {j}")));
    }
    let train = interactions.train_items(user);
    let mut cands: Vec<(u32, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(j, _)| train.binary_search(&(*j as u32)).is_err())
        .map(|(j, &s)| (j as u32, s))
        .collect();
    let k = k.min(cands.len());
    if k > 0 && k < cands.len() {
        cands.select_nth_unstable_by(k - 1, by_score_then_id);
    }
    cands.truncate(k);
    cands.sort_unstable_by(by_score_then_id);
    Ok(RankingResult {
        user,
        ranked_items: cands.iter().map(|c| c.0).collect(),
        scores: cands.iter().map(|c| c.1).collect(),
    })
}

/// Ranks the non-train items of an evaluable user by descending score,
/// breaking ties by ascending item id.
pub fn rank_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    interactions: &InteractionMatrix,
    k_max: usize,
) -> Result<RankingResult> {
    if user < interactions.n_users() && interactions.is_excluded(user) {
        return Err(Error::Data(format!("user {user} has no held-out items")));
    }
    top_candidates(scorer, user, interactions, k_max)
}

/// |top-k ∩ test| / |test|.
pub fn recall_at_k(ranking: &RankingResult, test_items: &[u32], k: usize) -> Result<f64> {
    if test_items.is_empty() {
        return Err(Error::Data(format!("user {} has an empty test set", ranking.user)));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let hits = ranking
        .ranked_items
        .iter()
        .take(k)
        .filter(|i| test_items.contains(i))
        .count();
    Ok(hits as f64 / test_items.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub ks: Vec<usize>,
    pub mean: Vec<f64>,
    /// Evaluated user ids, aligned with `per_user`.
    pub users: Vec<u32>,
    /// Recall of each evaluated user at each K.
    pub per_user: Vec<Vec<f64>>,
    pub excluded: usize,
}

impl RecallReport {
    pub fn mean_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean[i])
    }

    /// Per-user recall column at the `idx`-th K.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.per_user.iter().map(|r| r[idx]).collect()
    }

    /// Averages reports from several splits: user-wise means concatenated.
    pub fn average(reports: &[RecallReport]) -> Result<RecallReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Data("no reports to average".into()))?;
        if reports.iter().any(|r| r.ks != first.ks) {
            return Err(Error::Data("reports use different K lists".into()));
        }
        let n = reports.len() as f64;
        let mean = (0..first.ks.len())
            .map(|i| reports.iter().map(|r| r.mean[i]).sum::<f64>() / n)
            .collect();
        Ok(RecallReport {
            ks: first.ks.clone(),
            mean,
            users: reports.iter().flat_map(|r| r.users.iter().copied()).collect(),
            per_user: reports.iter().flat_map(|r| r.per_user.iter().cloned()).collect(),
            excluded: reports.iter().map(|r| r.excluded).sum(),
        })
    }
}

/// Mean Recall@K over users with at least one held-out item.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    interactions: &InteractionMatrix,
    ks: &[usize],
) -> Result<RecallReport> {
    if !interactions.is_split() {
        return Err(Error::Data("interactions have no train/test split".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config("K list must be non-empty with every K ≥ 1".into()));
    }
    let k_max = *ks.iter().max().expect("non-empty");
    let users: Vec<usize> = (0..interactions.n_users())
        .filter(|&u| !interactions.is_excluded(u))
        .collect();
    if users.is_empty() {
        return Err(Error::Data("no user has held-out items".into()));
    }
    let per_user = users
        .par_iter()
        .map(|&u| {
            let ranking = rank_candidates(scorer, u, interactions, k_max)?;
            let test = interactions.test_items(u);
            ks.iter()
                .map(|&k| recall_at_k(&ranking, test, k))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n = users.len() as f64;
    let mean = (0..ks.len())
        .map(|i| per_user.iter().map(|r| r[i]).sum::<f64>() / n)
        .collect();
    Ok(RecallReport {
        ks: ks.to_vec(),
        mean,
        users: users.iter().map(|&u| u as u32).collect(),
        per_user,
        excluded: interactions.n_excluded(),
    })
}
