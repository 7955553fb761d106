//! Seeded synthetic datasets for sanity checks and the toy pipeline.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{Document, InteractionMatrix, RawDocument};
use crate::rng;

/// Eight short documents over a vocabulary of filler words (ids 2..=13) and
/// four trigger keywords (ids 14..=17). All documents share the same filler
/// sentences, so the keywords are the only thing telling them apart. Tag `t`
/// is present exactly when keyword `14 + t` occurs; every document has at
/// least one tag.
pub struct TriggerCorpus {
    pub documents: Vec<Document>,
    pub vocab_size: usize,
    pub n_tags: usize,
}

impl TriggerCorpus {
    pub const FIRST_TRIGGER: u32 = 14;

    pub fn is_trigger(token: u32) -> bool {
        (Self::FIRST_TRIGGER..Self::FIRST_TRIGGER + 4).contains(&token)
    }

    pub fn generate(seed: u64) -> Self {
        let mut rng = rng::seeded(seed);
        let tag_sets: [&[u32]; 8] = [&[0], &[1], &[2], &[3], &[0, 1], &[2, 3], &[0, 2], &[1, 3]];
        let filler: Vec<Vec<u32>> = (0..3).map(|_| (0..6).map(|_| rng.gen_range(2..14)).collect()).collect();
        let documents = tag_sets
            .iter()
            .enumerate()
            .map(|(i, tags)| {
                let mut sentences = filler.clone();
                for &t in tags.iter() {
                    let s = rng.gen_range(0..sentences.len());
                    let pos = rng.gen_range(0..=sentences[s].len());
                    sentences[s].insert(pos, Self::FIRST_TRIGGER + t);
                }
                Document {
                    item_id: i as u32,
                    sentences,
                    tag_labels: tags.to_vec(),
                }
            })
            .collect();
        TriggerCorpus {
            documents,
            vocab_size: 18,
            n_tags: 4,
        }
    }
}

/// Users and items split into `n_blocks` communities. Each user interacts with
/// `items_per_user` distinct items, drawn from its own block with probability
/// `in_block`, otherwise uniformly from all items.
#[derive(Clone, Debug)]
pub struct BlockSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_blocks: usize,
    pub items_per_user: usize,
    pub in_block: f64,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec {
            n_users: 50,
            n_items: 200,
            n_blocks: 5,
            items_per_user: 20,
            in_block: 0.9,
        }
    }
}

pub fn block_of(index: usize, n: usize, n_blocks: usize) -> usize {
    index * n_blocks / n
}

pub fn planted_blocks(spec: &BlockSpec, seed: u64) -> InteractionMatrix {
    let mut rng = rng::seeded(seed);
    let block_items: Vec<Vec<u32>> = (0..spec.n_blocks)
        .map(|b| {
            (0..spec.n_items as u32)
                .filter(|&i| block_of(i as usize, spec.n_items, spec.n_blocks) == b)
                .collect()
        })
        .collect();
    let rows = (0..spec.n_users)
        .map(|u| {
            let own = &block_items[block_of(u, spec.n_users, spec.n_blocks)];
            let mut row: Vec<u32> = Vec::with_capacity(spec.items_per_user);
            while row.len() < spec.items_per_user.min(spec.n_items) {
                let item = if rng.gen_bool(spec.in_block) {
                    *own.choose(&mut rng).expect("non-empty block")
                } else {
                    rng.gen_range(0..spec.n_items as u32)
                };
                if !row.contains(&item) {
                    row.push(item);
                }
            }
            row
        })
        .collect();
    InteractionMatrix::from_rows(spec.n_items, rows).expect("generated ids are in range")
}

/// Text and tags for the items of a block dataset: each block has its own topic
/// words and tag, so content features carry the community signal.
pub fn block_documents(spec: &BlockSpec, seed: u64) -> (Vec<RawDocument>, Vec<String>) {
    let mut rng = rng::seeded(seed);
    let common = ["model", "data", "method", "results", "analysis", "approach", "study"];
    let docs = (0..spec.n_items)
        .map(|i| {
            let b = block_of(i, spec.n_items, spec.n_blocks);
            let topic: Vec<String> = (0..4).map(|k| format!("topic{b}word{k}")).collect();
            let sentences = (0..3)
                .map(|_| {
                    (0..6)
                        .map(|_| {
                            if rng.gen_bool(0.4) {
                                topic.choose(&mut rng).unwrap().clone()
                            } else {
                                common.choose(&mut rng).unwrap().to_string()
                            }
                        })
                        .collect()
                })
                .collect();
            let mut tags = vec![b as u32];
            if rng.gen_bool(0.3) {
                tags.push(spec.n_blocks as u32 + rng.gen_range(0..2));
            }
            RawDocument {
                id: i as u32,
                title: format!("Paper {i} on topic {b}"),
                sentences,
                tags,
            }
        })
        .collect();
    let mut tag_names: Vec<String> = (0..spec.n_blocks).map(|b| format!("topic-{b}")).collect();
    tag_names.push("misc-a".into());
    tag_names.push("misc-b".into());
    (docs, tag_names)
}
