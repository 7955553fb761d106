//! Dataset ingestion: implicit-feedback interactions, paper text, tags and the
//! leave-P-in train/test split.

mod documents;
mod interactions;
mod split;
mod tags;
pub mod text;

pub use documents::{
    encode_document, parse_documents, raw_documents, read_citeulike_text, read_documents_jsonl, read_item_tags,
    read_tag_names, write_documents_jsonl, Document, DocumentLimits, RawDocument, WordVocabulary, OOV_ID, PAD_ID,
};
pub use interactions::{parse_interactions, InteractionFormat, InteractionMatrix, SplitTag};
pub use split::{split_leave_p_in, SplitConfig};
pub use tags::{build_tag_vocabulary, reindex_tags, select_tags, TagVocabulary};

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::{Error, Result};

pub(crate) fn open_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String)>> + '_> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(move |(i, line)| line.map(|l| (i + 1, l)).map_err(|e| Error::io(path, e))))
}

/// Parses a non-negative decimal id that must fit in `u32`.
pub(crate) fn parse_id(field: &str, path: &Path, line: usize) -> Result<u32> {
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::parse(
            path,
            line,
            format!("expected a non-negative integer id, got {field:?}"),
        ));
    }
    match field.parse::<u64>() {
        Ok(v) if v < u32::MAX as u64 => Ok(v as u32),
        _ => Err(Error::parse(
            path,
            line,
            format!("id {field} overflows the 32-bit id space"),
        )),
    }
}
