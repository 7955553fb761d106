use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{InteractionMatrix, SplitTag};
use crate::{rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub p_train_per_user: usize,
    pub rng_seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            p_train_per_user: 10,
            rng_seed: 42,
        }
    }
}

/// Tags `min(P, |items|)` uniformly chosen items of each user as train and the
/// rest as test. Users are processed in index order from a single seeded stream.
pub fn split_leave_p_in(m: &InteractionMatrix, cfg: &SplitConfig) -> Result<InteractionMatrix> {
    if cfg.p_train_per_user == 0 {
        return Err(Error::Config("p_train_per_user must be at least 1".into()));
    }
    let mut rng = rng::seeded(cfg.rng_seed);
    let tags = m
        .rows()
        .iter()
        .map(|row| {
            let n = row.len();
            let mut tags = vec![SplitTag::Test; n];
            for pos in sample(&mut rng, n, cfg.p_train_per_user.min(n)) {
                tags[pos] = SplitTag::Train;
            }
            tags
        })
        .collect();
    m.clone().with_split(tags)
}
