//! MovieLens-format ingestion: whitespace-separated lines of
//! `user_id item_id rating [timestamp]` with 1-based ids.

use crate::{CliError, Result};
use certproj::objectives::ObservationSet;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct IngestStats {
    /// Number of (user, item) pairs that appeared more than once; the last
    /// occurrence wins.
    pub duplicates: usize,
    pub lines: usize,
}

/// Parses a ratings file into an observation set. 1-based ids are mapped to
/// 0-based indices; the matrix shape is the maximum id seen per axis.
pub fn ingest_movielens(path: &Path) -> Result<(ObservationSet, IngestStats)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(path.display().to_string(), e))?;
    ingest_movielens_str(&text)
}

pub fn ingest_movielens_str(text: &str) -> Result<(ObservationSet, IngestStats)> {
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut stats = IngestStats::default();
    let mut max_row = 0usize;
    let mut max_col = 0usize;

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let user = parse_id(fields.next(), "user id", line_no)?;
        let item = parse_id(fields.next(), "item id", line_no)?;
        let rating: f64 = fields
            .next()
            .ok_or_else(|| CliError::input(format!("line {line_no}: missing rating")))?
            .parse()
            .map_err(|_| CliError::input(format!("line {line_no}: unparseable rating")))?;
        if !rating.is_finite() {
            return Err(CliError::input(format!("line {line_no}: non-finite rating")));
        }
        // Optional trailing timestamp is ignored.
        stats.lines += 1;
        let key = (user - 1, item - 1);
        if entries.insert(key, rating).is_some() {
            stats.duplicates += 1;
        }
        max_row = max_row.max(user);
        max_col = max_col.max(item);
    }

    if entries.is_empty() {
        return Err(CliError::input("ratings file contains no entries"));
    }
    let observations = ObservationSet::new(
        max_row,
        max_col,
        entries.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
    )?;
    Ok((observations, stats))
}

fn parse_id(field: Option<&str>, name: &str, line_no: usize) -> Result<usize> {
    let raw = field
        .ok_or_else(|| CliError::input(format!("line {line_no}: missing {name}")))?;
    let id: usize = raw
        .parse()
        .map_err(|_| CliError::input(format!("line {line_no}: unparseable {name} `{raw}`")))?;
    if id == 0 {
        return Err(CliError::input(format!(
            "line {line_no}: {name} must be 1-based, got 0"
        )));
    }
    Ok(id)
}
