use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::tokenize_document;
use super::{open_lines, parse_id};
use crate::{Error, Result};

/// Reserved id for padding positions.
pub const PAD_ID: u32 = 0;
/// Shared id for words outside the vocabulary.
pub const OOV_ID: u32 = 1;
const FIRST_WORD_ID: u32 = 2;

/// Tokenized paper text as stored in the canonical `documents.jsonl`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocument {
    pub id: u32,
    #[serde(default)]
    pub title: String,
    pub sentences: Vec<Vec<String>>,
    /// Raw tag ids (indices into the full tag name list).
    pub tags: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentLimits {
    pub max_sentences: usize,
    pub max_words: usize,
}

impl Default for DocumentLimits {
    fn default() -> Self {
        DocumentLimits {
            max_sentences: 10,
            max_words: 50,
        }
    }
}

/// A paper as seen by the encoder: truncated sentences of word ids plus tag labels.
///
/// `tag_labels` holds raw tag ids until [`reindex_tags`](super::reindex_tags)
/// maps them into a [`TagVocabulary`](super::TagVocabulary).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub item_id: u32,
    pub sentences: Vec<Vec<u32>>,
    pub tag_labels: Vec<u32>,
}

impl Document {
    pub fn n_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_tokens() == 0
    }
}

/// Word ↔ id map. Ids 0 and 1 are padding and OOV; real words start at 2 in
/// descending corpus frequency with lexicographic tie-break.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct WordVocabulary {
    words: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl From<Vec<String>> for WordVocabulary {
    fn from(words: Vec<String>) -> Self {
        let lookup = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32 + FIRST_WORD_ID))
            .collect();
        WordVocabulary { words, lookup }
    }
}

impl From<WordVocabulary> for Vec<String> {
    fn from(v: WordVocabulary) -> Self {
        v.words
    }
}

impl WordVocabulary {
    /// Keeps the `max_words` most frequent tokens of `docs`.
    pub fn build(docs: &[RawDocument], max_words: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for tok in docs.iter().flat_map(|d| d.sentences.iter().flatten()) {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_words);
        ranked.into_iter().map(|(w, _)| w.to_owned()).collect::<Vec<_>>().into()
    }

    pub fn id(&self, word: &str) -> u32 {
        self.lookup.get(word).copied().unwrap_or(OOV_ID)
    }

    pub fn word(&self, id: u32) -> Option<&str> {
        id.checked_sub(FIRST_WORD_ID)
            .and_then(|i| self.words.get(i as usize))
            .map(String::as_str)
    }

    /// Number of real words, excluding the padding and OOV ids.
    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    /// Size of the id space including the two reserved ids.
    pub fn size(&self) -> usize {
        self.words.len() + FIRST_WORD_ID as usize
    }

    pub fn is_word_id(id: u32) -> bool {
        id >= FIRST_WORD_ID
    }
}

pub fn encode_document(raw: &RawDocument, vocab: &WordVocabulary, limits: DocumentLimits) -> Document {
    let sentences = raw
        .sentences
        .iter()
        .take(limits.max_sentences)
        .map(|s| s.iter().take(limits.max_words).map(|w| vocab.id(w)).collect())
        .collect();
    let mut tag_labels = raw.tags.clone();
    tag_labels.sort_unstable();
    tag_labels.dedup();
    Document {
        item_id: raw.id,
        sentences,
        tag_labels,
    }
}

/// Reads `(title, abstract)` records from a citeulike-a style `raw-data.csv`.
/// Record k (0-based, header excluded) is item k.
pub fn read_citeulike_text(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
    let title_col = column(&["raw.title", "title"]).ok_or_else(|| Error::parse(path, 1, "missing title column"))?;
    let abstract_col =
        column(&["raw.abstract", "abstract"]).ok_or_else(|| Error::parse(path, 1, "missing abstract column"))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let field = |i: usize| record.get(i).unwrap_or("").to_owned();
        out.push((field(title_col), field(abstract_col)));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(path, line, e.to_string())
}

/// Reads an item-tag file: line k is item k, a leading count then raw tag ids.
pub fn read_item_tags(path: &Path, n_raw_tags: usize) -> Result<Vec<Vec<u32>>> {
    let mut out = Vec::new();
    for line in open_lines(path)? {
        let (no, text) = line?;
        let ids = text
            .split_whitespace()
            .map(|f| parse_id(f, path, no))
            .collect::<Result<Vec<_>>>()?;
        let tags = match ids.split_first() {
            None => Vec::new(),
            Some((&count, rest)) => {
                if count as usize != rest.len() {
                    return Err(Error::parse(
                        path,
                        no,
                        format!("count field says {count} tags, found {}", rest.len()),
                    ));
                }
                rest.to_vec()
            }
        };
        if let Some(&bad) = tags.iter().find(|&&t| t as usize >= n_raw_tags) {
            return Err(Error::parse(
                path,
                no,
                format!("tag id {bad} out of range for {n_raw_tags} known tags"),
            ));
        }
        out.push(tags);
    }
    Ok(out)
}

/// One tag name per line; line k names raw tag k.
pub fn read_tag_names(path: &Path) -> Result<Vec<String>> {
    open_lines(path)?
        .map(|l| l.map(|(_, text)| text.trim().to_owned()))
        .collect()
}

/// Joins per-item text and tags. Items with tags but no text get empty sentences.
pub fn raw_documents(texts: &[(String, String)], item_tags: &[Vec<u32>]) -> Vec<RawDocument> {
    let n = texts.len().max(item_tags.len());
    (0..n)
        .map(|i| {
            let (title, sentences) = match texts.get(i) {
                Some((title, abs)) => (title.clone(), tokenize_document(title, abs)),
                None => (String::new(), Vec::new()),
            };
            RawDocument {
                id: i as u32,
                title,
                sentences,
                tags: item_tags.get(i).cloned().unwrap_or_default(),
            }
        })
        .collect()
}

/// Parses paper text and the item-tag map into encoder documents, building a
/// word vocabulary of at most `vocab_size` words.
pub fn parse_documents(
    text_path: &Path,
    tag_map_path: &Path,
    n_raw_tags: usize,
    vocab_size: usize,
    limits: DocumentLimits,
) -> Result<(Vec<Document>, WordVocabulary)> {
    let texts = read_citeulike_text(text_path)?;
    let tags = read_item_tags(tag_map_path, n_raw_tags)?;
    let raw = raw_documents(&texts, &tags);
    let vocab = WordVocabulary::build(&raw, vocab_size);
    let docs = raw.iter().map(|r| encode_document(r, &vocab, limits)).collect();
    Ok((docs, vocab))
}

pub fn write_documents_jsonl(path: &Path, docs: &[RawDocument]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_documents_jsonl(path: &Path) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for line in open_lines(path)? {
        let (no, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&text).map_err(|e| Error::parse(path, no, e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn raw(id: u32, sentences: &[&[&str]]) -> RawDocument {
        RawDocument {
            id,
            title: String::new(),
            sentences: sentences
                .iter()
                .map(|s| s.iter().map(|w| w.to_string()).collect())
                .collect(),
            tags: vec![],
        }
    }

    #[test]
    fn vocabulary_orders_by_frequency_then_word() {
        let docs = vec![raw(0, &[&["b", "a", "c"], &["c", "b"]]), raw(1, &[&["d", "c"]])];
        let v = WordVocabulary::build(&docs, 3);
        assert_eq!(v.n_words(), 3);
        assert_eq!(v.size(), 5);
        assert_eq!(v.id("c"), 2);
        assert_eq!(v.id("b"), 3);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("d"), OOV_ID);
        assert_eq!(v.word(3), Some("b"));
        assert_eq!(v.word(OOV_ID), None);
    }

    #[test]
    fn truncation_keeps_title_and_first_sentences() {
        let sentences: Vec<Vec<String>> = (0..15).map(|i| vec![format!("w{i}"); 60]).collect();
        let doc = RawDocument {
            id: 3,
            title: "t".into(),
            sentences,
            tags: vec![4, 1, 4],
        };
        let v = WordVocabulary::build(std::slice::from_ref(&doc), 100);
        let enc = encode_document(&doc, &v, DocumentLimits::default());
        assert_eq!(enc.sentences.len(), 10);
        assert!(enc.sentences.iter().all(|s| s.len() == 50));
        assert_eq!(enc.sentences[0][0], v.id("w0"));
        assert_eq!(enc.tag_labels, vec![1, 4]);
    }

    #[test]
    fn unknown_words_map_to_oov() {
        let v = WordVocabulary::build(&[raw(0, &[&["known"]])], 10);
        let enc = encode_document(&raw(1, &[&["x", "y"], &["z"]]), &v, DocumentLimits::default());
        assert!(enc.sentences.iter().flatten().all(|&t| t == OOV_ID));
    }

    #[test]
    fn parse_citeulike_style_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let text = dir.path().join("raw-data.csv");
        std::fs::write(
            &text,
            "doc.id,title,citeulike.id,raw.title,raw.abstract\n\
             1,x,42,\"{Deep} Nets\",\"Deep nets. They work.\"\n\
             2,y,43,\"Other\",\"One sentence only\"\n",
        )
        .unwrap();
        let tags = dir.path().join("item-tag.dat");
        let mut f = File::create(&tags).unwrap();
        writeln!(f, "2 0 2").unwrap();
        writeln!(f, "0").unwrap();
        writeln!(f, "1 1").unwrap();
        drop(f);
        let (docs, vocab) = parse_documents(&text, &tags, 3, 100, DocumentLimits::default()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(docs[0].sentences.len(), 3);
        assert_eq!(docs[0].tag_labels, vec![0, 2]);
        assert_eq!(docs[1].tag_labels, Vec::<u32>::new());
        // the third item has tags but no text: it stays as a cold document
        assert!(docs[2].is_empty());
        assert_eq!(docs[2].tag_labels, vec![1]);
        assert_eq!(vocab.id("deep"), 2);

        let err = parse_documents(&text, &tags, 2, 100, DocumentLimits::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let mut a = raw(0, &[&["a", "b"]]);
        a.tags = vec![3];
        a.title = "A, b".into();
        let docs = vec![a, raw(1, &[])];
        write_documents_jsonl(&path, &docs).unwrap();
        assert_eq!(read_documents_jsonl(&path).unwrap(), docs);
    }
}
