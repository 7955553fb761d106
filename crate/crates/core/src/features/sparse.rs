use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, WordVocabulary};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Identity,
    Tags,
    Tfidf,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Identity => "identity",
            FeatureKind::Tags => "tags",
            FeatureKind::Tfidf => "tfidf",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(FeatureKind::Identity),
            "tags" => Ok(FeatureKind::Tags),
            "tfidf" => Ok(FeatureKind::Tfidf),
            other => Err(Error::Config(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Sparse row-per-entity feature matrix. Rows are items for item features and
/// users for the user side, which only ever uses identity features.
///
/// Within a row, feature indices are strictly increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub n_items: usize,
    pub n_features: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
    pub kind: FeatureKind,
    pub has_identity: bool,
}

impl FeatureMatrix {
    pub fn row(&self, item: usize) -> &[(u32, f64)] {
        &self.rows[item]
    }

    /// Offset of the first non-identity feature.
    pub fn content_offset(&self) -> usize {
        if self.has_identity {
            self.n_items
        } else {
            0
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Writes `item_id\tfeature_id\tweight` lines after a `#` header carrying
    /// the dimensions, which a bare triple list cannot recover.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(
            out,
            "# {} {} {} {}",
            self.n_items,
            self.n_features,
            self.kind.as_str(),
            if self.has_identity { "identity" } else { "no-identity" }
        )
        .map_err(io)?;
        for (item, row) in self.rows.iter().enumerate() {
            for &(f, w) in row {
                writeln!(out, "{item}\t{f}\t{}", super::format_sig9(w)).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let mut lines = crate::corpus::open_lines(path)?;
        let header = match lines.next() {
            Some(line) => line?.1,
            None => return Err(Error::parse(path, 1, "empty feature file")),
        };
        let fields: Vec<&str> = header.trim_start_matches('#').split_whitespace().collect();
        if !header.starts_with('#') || fields.len() != 4 {
            return Err(Error::parse(
                path,
                1,
                "expected `# n_items n_features kind identity` header",
            ));
        }
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, 1, format!("bad dimension {s:?}")))
        };
        let n_items = num(fields[0])?;
        let n_features = num(fields[1])?;
        let kind: FeatureKind = fields[2]
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad kind {:?}", fields[2])))?;
        let has_identity = fields[3] == "identity";
        let mut rows = vec![Vec::new(); n_items];
        for line in lines {
            let (no, text) = line?;
            let f: Vec<&str> = text.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(path, no, "expected 3 tab-separated fields"));
            }
            let item: usize = f[0].parse().map_err(|_| Error::parse(path, no, "bad item id"))?;
            let feat: u32 = f[1].parse().map_err(|_| Error::parse(path, no, "bad feature id"))?;
            let w: f64 = f[2].parse().map_err(|_| Error::parse(path, no, "bad weight"))?;
            if item >= n_items || feat as usize >= n_features || !w.is_finite() {
                return Err(Error::parse(path, no, "entry outside declared dimensions"));
            }
            rows[item].push((feat, w));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|e| e.0);
        }
        Ok(FeatureMatrix {
            n_items,
            n_features,
            rows,
            kind,
            has_identity,
        })
    }
}

/// One indicator per entity: row j = {(j, 1)}.
pub fn build_identity_features(n_items: usize) -> Result<FeatureMatrix> {
    if n_items == 0 {
        return Err(Error::Data("identity features need at least one row".into()));
    }
    Ok(FeatureMatrix {
        n_items,
        n_features: n_items,
        rows: (0..n_items as u32).map(|j| vec![(j, 1.0)]).collect(),
        kind: FeatureKind::Identity,
        has_identity: true,
    })
}

fn base_rows(n_items: usize, include_identity: bool) -> Vec<Vec<(u32, f64)>> {
    (0..n_items as u32)
        .map(|j| if include_identity { vec![(j, 1.0)] } else { Vec::new() })
        .collect()
}

/// Identity block (optional) followed by `n_tags` one-hot tag indicators.
/// Document tag labels must already be vocabulary indices.
pub fn build_tag_features(
    documents: &[Document],
    n_items: usize,
    n_tags: usize,
    include_identity: bool,
) -> Result<FeatureMatrix> {
    let offset = if include_identity { n_items } else { 0 };
    let mut rows = base_rows(n_items, include_identity);
    for doc in documents {
        let row = rows
            .get_mut(doc.item_id as usize)
            .ok_or_else(|| Error::Data(format!("document for item {} beyond {n_items} items", doc.item_id)))?;
        let mut labels = doc.tag_labels.clone();
        labels.sort_unstable();
        labels.dedup();
        for t in labels {
            if t as usize >= n_tags {
                return Err(Error::Data(format!(
                    "item {} has tag index {t} outside vocabulary of {n_tags}",
                    doc.item_id
                )));
            }
            row.push(((offset + t as usize) as u32, 1.0));
        }
    }
    Ok(FeatureMatrix {
        n_items,
        n_features: offset + n_tags,
        rows,
        kind: FeatureKind::Tags,
        has_identity: include_identity,
    })
}

/// TF-IDF over the vocabulary's real words: tf = raw count, idf = ln(N / df),
/// rows L2-normalized. Terms present in every document have zero weight and are
/// dropped; padding and OOV tokens are ignored.
pub fn build_tfidf_features(
    documents: &[Document],
    n_items: usize,
    vocab: &WordVocabulary,
    include_identity: bool,
) -> Result<FeatureMatrix> {
    if documents.is_empty() {
        return Err(Error::Data("TF-IDF needs a non-empty corpus".into()));
    }
    let offset = if include_identity { n_items } else { 0 };
    let n_words = vocab.n_words();
    let word_index = |id: u32| -> Option<usize> {
        WordVocabulary::is_word_id(id)
            .then(|| id as usize - 2)
            .filter(|&w| w < n_words)
    };

    let term_counts: Vec<Vec<(usize, f64)>> = documents
        .iter()
        .map(|doc| {
            let mut words: Vec<usize> = doc
                .sentences
                .iter()
                .flatten()
                .filter_map(|&id| word_index(id))
                .collect();
            words.sort_unstable();
            let mut counts: Vec<(usize, f64)> = Vec::new();
            for w in words {
                match counts.last_mut() {
                    Some((last, c)) if *last == w => *c += 1.0,
                    _ => counts.push((w, 1.0)),
                }
            }
            counts
        })
        .collect();

    let mut df = vec![0usize; n_words];
    for counts in &term_counts {
        for &(w, _) in counts {
            df[w] += 1;
        }
    }
    let n_docs = documents.len() as f64;

    let mut rows = base_rows(n_items, include_identity);
    for (doc, counts) in documents.iter().zip(&term_counts) {
        let row = rows
            .get_mut(doc.item_id as usize)
            .ok_or_else(|| Error::Data(format!("document for item {} beyond {n_items} items", doc.item_id)))?;
        let weighted: Vec<(usize, f64)> = counts
            .iter()
            .map(|&(w, tf)| (w, tf * (n_docs / df[w] as f64).ln()))
            .filter(|&(_, x)| x > 0.0)
            .collect();
        let norm = weighted.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.extend(weighted.into_iter().map(|(w, x)| ((offset + w) as u32, x / norm)));
        }
    }
    Ok(FeatureMatrix {
        n_items,
        n_features: offset + n_words,
        rows,
        kind: FeatureKind::Tfidf,
        has_identity: include_identity,
    })
}
