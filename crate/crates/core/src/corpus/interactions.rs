use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open_lines, parse_id};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionFormat {
    /// One line per user, whitespace-separated item ids, optional leading count.
    Adjacency,
    /// `user_id<TAB>item_id` per line.
    Pairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitTag {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Split {
    tags: Vec<Vec<SplitTag>>,
    train: Vec<Vec<u32>>,
    test: Vec<Vec<u32>>,
}

/// Binary user × item implicit-feedback matrix stored as sorted per-user rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionMatrix {
    n_users: usize,
    n_items: usize,
    rows: Vec<Vec<u32>>,
    split: Option<Split>,
}

impl InteractionMatrix {
    /// Builds a matrix from per-user item lists, sorting and deduplicating each row.
    pub fn from_rows(n_items: usize, mut rows: Vec<Vec<u32>>) -> Result<Self> {
        for (user, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= n_items {
                    return Err(Error::Data(format!(
                        "user {user} references item {last} but only {n_items} items exist"
                    )));
                }
            }
        }
        Ok(InteractionMatrix {
            n_users: rows.len(),
            n_items,
            rows,
            split: None,
        })
    }

    pub fn from_pairs(n_users: usize, n_items: usize, pairs: &[(u32, u32)]) -> Result<Self> {
        let mut rows = vec![Vec::new(); n_users];
        for &(u, i) in pairs {
            let row = rows
                .get_mut(u as usize)
                .ok_or_else(|| Error::Data(format!("user {u} out of range for {n_users} users")))?;
            row.push(i);
        }
        Self::from_rows(n_items, rows)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_pairs(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Fraction of observed user-item cells.
    pub fn density(&self) -> f64 {
        if self.n_users == 0 || self.n_items == 0 {
            return 0.0;
        }
        self.n_pairs() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    pub fn row(&self, user: usize) -> &[u32] {
        &self.rows[user]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn contains(&self, user: usize, item: u32) -> bool {
        self.rows.get(user).is_some_and(|row| row.binary_search(&item).is_ok())
    }

    /// Grows the item index, e.g. to include cold items that only have text.
    pub fn with_n_items(mut self, n_items: usize) -> Result<Self> {
        if n_items < self.n_items {
            return Err(Error::Data(format!(
                "cannot shrink item index from {} to {n_items}",
                self.n_items
            )));
        }
        self.n_items = n_items;
        Ok(self)
    }

    /// Attaches per-pair split tags aligned with [`row`](Self::row).
    pub fn with_split(mut self, tags: Vec<Vec<SplitTag>>) -> Result<Self> {
        if tags.len() != self.n_users {
            return Err(Error::Dimension(format!(
                "{} split rows for {} users",
                tags.len(),
                self.n_users
            )));
        }
        let mut train = Vec::with_capacity(self.n_users);
        let mut test = Vec::with_capacity(self.n_users);
        for (user, (row, row_tags)) in self.rows.iter().zip(&tags).enumerate() {
            if row.len() != row_tags.len() {
                return Err(Error::Dimension(format!(
                    "user {user}: {} split tags for {} items",
                    row_tags.len(),
                    row.len()
                )));
            }
            let (tr, te): (Vec<_>, Vec<_>) = row.iter().zip(row_tags).partition(|(_, &tag)| tag == SplitTag::Train);
            train.push(tr.into_iter().map(|(&i, _)| i).collect());
            test.push(te.into_iter().map(|(&i, _)| i).collect());
        }
        self.split = Some(Split { tags, train, test });
        Ok(self)
    }

    pub fn is_split(&self) -> bool {
        self.split.is_some()
    }

    pub fn split_tags(&self, user: usize) -> Option<&[SplitTag]> {
        self.split.as_ref().map(|s| s.tags[user].as_slice())
    }

    pub fn split_tag(&self, user: usize, item: u32) -> Option<SplitTag> {
        let pos = self.rows.get(user)?.binary_search(&item).ok()?;
        self.split.as_ref().map(|s| s.tags[user][pos])
    }

    /// Train-tagged items of `user`, sorted. Without a split every item counts as train.
    pub fn train_items(&self, user: usize) -> &[u32] {
        match &self.split {
            Some(s) => &s.train[user],
            None => &self.rows[user],
        }
    }

    pub fn test_items(&self, user: usize) -> &[u32] {
        match &self.split {
            Some(s) => &s.test[user],
            None => &[],
        }
    }

    pub fn is_train(&self, user: usize, item: u32) -> bool {
        self.train_items(user).binary_search(&item).is_ok()
    }

    /// Users with no held-out items cannot be scored by Recall@K.
    pub fn is_excluded(&self, user: usize) -> bool {
        self.test_items(user).is_empty()
    }

    pub fn n_excluded(&self) -> usize {
        (0..self.n_users).filter(|&u| self.is_excluded(u)).count()
    }

    /// All train-tagged (user, item) pairs in user-major order.
    pub fn train_pairs(&self) -> Vec<(u32, u32)> {
        (0..self.n_users)
            .flat_map(|u| self.train_items(u).iter().map(move |&i| (u as u32, i)))
            .collect()
    }

    /// Reads the canonical TSV with explicit dimensions, so that trailing users or
    /// items without interactions survive a round trip.
    pub fn read_tsv(path: &Path, n_users: usize, n_items: usize) -> Result<Self> {
        let parsed = parse_pairs(path)?;
        if parsed.n_users > n_users || parsed.n_items > n_items {
            return Err(Error::Data(format!(
                "{}: ids exceed declared dimensions {n_users} users × {n_items} items",
                path.display()
            )));
        }
        let mut rows = parsed.rows;
        rows.resize(n_users, Vec::new());
        Self::from_rows(n_items, rows)
    }

    /// Writes the canonical `user_id\titem_id` TSV.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (u, row) in self.rows.iter().enumerate() {
            for i in row {
                writeln!(out, "{u}\t{i}").map_err(|e| Error::io(path, e))?;
            }
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Parses an interaction file. User and item counts are one past the largest id seen.
pub fn parse_interactions(path: &Path, format: InteractionFormat) -> Result<InteractionMatrix> {
    match format {
        InteractionFormat::Adjacency => parse_adjacency(path),
        InteractionFormat::Pairs => parse_pairs(path),
    }
}

fn parse_adjacency(path: &Path) -> Result<InteractionMatrix> {
    let mut lines = Vec::new();
    for line in open_lines(path)? {
        let (no, text) = line?;
        let ids = text
            .split_whitespace()
            .map(|f| parse_id(f, path, no))
            .collect::<Result<Vec<_>>>()?;
        lines.push(ids);
    }
    // The leading count is only stripped when every non-empty line carries one.
    let counted = lines.iter().any(|l| !l.is_empty())
        && lines
            .iter()
            .filter(|l| !l.is_empty())
            .all(|l| l[0] as usize == l.len() - 1);
    let rows: Vec<Vec<u32>> = lines
        .into_iter()
        .map(|mut l| {
            if counted && !l.is_empty() {
                l.remove(0);
            }
            l
        })
        .collect();
    let n_items = rows.iter().flatten().max().map_or(0, |&m| m as usize + 1);
    InteractionMatrix::from_rows(n_items, rows)
}

fn parse_pairs(path: &Path) -> Result<InteractionMatrix> {
    let mut pairs = Vec::new();
    for line in open_lines(path)? {
        let (no, text) = line?;
        if text.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = text.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                no,
                format!("expected `user_id<TAB>item_id`, got {} fields", fields.len()),
            ));
        }
        pairs.push((parse_id(fields[0], path, no)?, parse_id(fields[1], path, no)?));
    }
    let n_users = pairs.iter().map(|p| p.0).max().map_or(0, |m| m as usize + 1);
    let n_items = pairs.iter().map(|p| p.1).max().map_or(0, |m| m as usize + 1);
    InteractionMatrix::from_pairs(n_users, n_items, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file_with(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_file_is_empty_matrix() {
        let f = file_with("");
        for format in [InteractionFormat::Adjacency, InteractionFormat::Pairs] {
            let m = parse_interactions(f.path(), format).unwrap();
            assert_eq!((m.n_users(), m.n_items(), m.n_pairs()), (0, 0, 0));
        }
    }

    #[test]
    fn pairs_are_deduplicated() {
        let f = file_with("0\t2\n0\t2\n1\t0\n");
        let m = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap();
        assert_eq!(m.n_users(), 2);
        assert_eq!(m.rows(), &[vec![2], vec![0]]);
        assert_eq!(m.n_pairs(), 2);
    }

    #[test]
    fn adjacency_detects_leading_counts() {
        let f = file_with("3 5 1 9\n1 4\n\n2 0 7\n");
        let m = parse_interactions(f.path(), InteractionFormat::Adjacency).unwrap();
        assert_eq!(m.n_users(), 4);
        assert_eq!(m.rows(), &[vec![1, 5, 9], vec![4], vec![], vec![0, 7]]);
        assert_eq!(m.n_items(), 10);
    }

    #[test]
    fn adjacency_without_counts_keeps_first_field() {
        let f = file_with("5 1 9\n4\n");
        let m = parse_interactions(f.path(), InteractionFormat::Adjacency).unwrap();
        assert_eq!(m.rows(), &[vec![1, 5, 9], vec![4]]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = file_with("0\t1\n0\tx\n");
        let err = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
        let f = file_with("0\t1\t2\n");
        assert!(matches!(
            parse_interactions(f.path(), InteractionFormat::Pairs),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn id_overflow_is_an_error() {
        let f = file_with("0\t99999999999\n");
        let err = parse_interactions(f.path(), InteractionFormat::Pairs).unwrap_err();
        assert!(err.to_string().contains("overflows"), "{err}");
    }

    #[test]
    fn split_bookkeeping() {
        let m = InteractionMatrix::from_rows(5, vec![vec![4, 1, 2]]).unwrap();
        let m = m
            .with_split(vec![vec![SplitTag::Test, SplitTag::Train, SplitTag::Test]])
            .unwrap();
        assert_eq!(m.train_items(0), &[2]);
        assert_eq!(m.test_items(0), &[1, 4]);
        assert_eq!(m.split_tag(0, 2), Some(SplitTag::Train));
        assert_eq!(m.split_tag(0, 3), None);
        assert!(!m.is_excluded(0));
        assert_eq!(m.train_pairs(), vec![(0, 2)]);
    }

    #[test]
    fn tsv_round_trip() {
        let m = InteractionMatrix::from_rows(6, vec![vec![0, 5], vec![3], vec![1, 2, 4]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.tsv");
        m.write_tsv(&path).unwrap();
        let back = parse_interactions(&path, InteractionFormat::Pairs).unwrap();
        assert_eq!(back, m);
    }
}
