//! Tokenization and sentence segmentation.
//!
//! Tokens are lowercased maximal runs of alphanumeric characters; runs made only
//! of digits are dropped. Sentences end at `.`, `!` or `?` followed by whitespace
//! or the end of the text.

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !t.chars().all(|c| c.is_numeric()))
        .map(str::to_lowercase)
        .collect()
}

pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().map_or(true, |&(_, next)| next.is_whitespace());
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    if start < text.len() {
        out.push(&text[start..]);
    }
    out.retain(|s| !s.trim().is_empty());
    out
}

/// Title as sentence 0 followed by the abstract's sentences. Sentences without
/// any token are skipped.
pub fn tokenize_document(title: &str, abstract_text: &str) -> Vec<Vec<String>> {
    std::iter::once(title)
        .chain(split_sentences(abstract_text))
        .map(tokenize)
        .filter(|s| !s.is_empty())
        .collect()
}
