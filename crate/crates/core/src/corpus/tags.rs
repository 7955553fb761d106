use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Document;
use crate::{Error, Result};

/// The `t` most frequent tags, ordered by descending item frequency with
/// lexicographic tie-break.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagVocabulary {
    pub tags: Vec<String>,
    /// Number of items carrying each tag, aligned with `tags`.
    pub frequency: Vec<usize>,
    /// Raw tag id of each entry, aligned with `tags`.
    pub raw_ids: Vec<u32>,
}

impl TagVocabulary {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn frequency_of(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag).map(|i| self.frequency[i])
    }
}

/// Picks the top-`t` tags of `documents` (whose labels are raw ids into `raw_tags`).
pub fn select_tags(documents: &[Document], raw_tags: &[String], t: usize) -> Result<TagVocabulary> {
    if t == 0 {
        return Err(Error::Config("tag vocabulary size must be at least 1".into()));
    }
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for doc in documents {
        let mut labels = doc.tag_labels.clone();
        labels.sort_unstable();
        labels.dedup();
        for id in labels {
            if id as usize >= raw_tags.len() {
                return Err(Error::Data(format!(
                    "item {} carries tag id {id} but only {} tag names are known",
                    doc.item_id,
                    raw_tags.len()
                )));
            }
            *counts.entry(id).or_default() += 1;
        }
    }
    if t > counts.len() {
        return Err(Error::Data(format!(
            "requested {t} tags but the corpus uses only {} distinct tags",
            counts.len()
        )));
    }
    let mut ranked: Vec<(u32, usize)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| {
        b.1.cmp(&a.1)
            .then_with(|| raw_tags[a.0 as usize].cmp(&raw_tags[b.0 as usize]))
            .then_with(|| a.0.cmp(&b.0))
    });
    ranked.truncate(t);
    Ok(TagVocabulary {
        tags: ranked.iter().map(|&(id, _)| raw_tags[id as usize].clone()).collect(),
        frequency: ranked.iter().map(|&(_, c)| c).collect(),
        raw_ids: ranked.iter().map(|&(id, _)| id).collect(),
    })
}

/// Rewrites raw tag labels as vocabulary indices, dropping tags outside it.
pub fn reindex_tags(documents: &mut [Document], vocab: &TagVocabulary) {
    let index: HashMap<u32, u32> = vocab
        .raw_ids
        .iter()
        .enumerate()
        .map(|(i, &raw)| (raw, i as u32))
        .collect();
    for doc in documents {
        let mut labels: Vec<u32> = doc
            .tag_labels
            .iter()
            .filter_map(|raw| index.get(raw).copied())
            .collect();
        labels.sort_unstable();
        labels.dedup();
        doc.tag_labels = labels;
    }
}

/// [`select_tags`] followed by [`reindex_tags`].
pub fn build_tag_vocabulary(documents: &mut [Document], raw_tags: &[String], t: usize) -> Result<TagVocabulary> {
    let vocab = select_tags(documents, raw_tags, t)?;
    reindex_tags(documents, &vocab);
    Ok(vocab)
}
