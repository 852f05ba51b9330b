//! Dated document corpora: manifest loading, document ingestion and
//! per-year counts.
//!
//! A manifest is a UTF-8 CSV file with the header `path,date,title`. Paths
//! are resolved against the directory holding the manifest and dates use
//! ISO-8601 (`YYYY-MM-DD`).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest header must be `path,date,title`, found `{0}`")]
    BadHeader(String),
    #[error("manifest row {row}: {message}")]
    MalformedRow { row: u64, message: String },
    #[error("manifest row {row}: invalid date `{value}`")]
    BadDate { row: u64, value: String },
    #[error("manifest row {row}: duplicate path {path}")]
    DuplicatePath { row: u64, path: PathBuf },
    #[error("document {path} is empty")]
    EmptyDocument { path: PathBuf },
}

/// One dated transcript.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub date: NaiveDate,
    pub title: String,
    pub raw_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub date: NaiveDate,
    pub title: String,
}

/// Ordered list of corpus entries, ascending by date.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Parses an ISO-8601 calendar date.
pub fn parse_date(value: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d").ok()
}

/// Reads a manifest CSV. Entries come back sorted by date (stable, so rows
/// sharing a date keep their file order).
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

/// Parses manifest text, resolving relative paths against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| CorpusError::MalformedRow {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<&str> = header.iter().collect();
    if names != ["path", "date", "title"] {
        return Err(CorpusError::BadHeader(names.join(",")));
    }

    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (index, record) in reader.records().enumerate() {
        // header is row 1
        let row = index as u64 + 2;
        let record = record.map_err(|e| CorpusError::MalformedRow {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(CorpusError::MalformedRow {
                row,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let raw_path = &record[0];
        if raw_path.is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                message: "empty path".into(),
            });
        }
        let date = parse_date(&record[1]).ok_or_else(|| CorpusError::BadDate {
            row,
            value: record[1].to_string(),
        })?;
        let rel = PathBuf::from(raw_path);
        let resolved = if rel.is_absolute() { rel } else { base.join(rel) };
        if !seen.insert(resolved.clone()) {
            return Err(CorpusError::DuplicatePath {
                row,
                path: resolved,
            });
        }
        entries.push(ManifestEntry {
            path: resolved,
            date,
            title: record[2].to_string(),
        });
    }
    entries.sort_by_key(|e| e.date);
    Ok(Manifest { entries })
}

/// Lowercase ASCII alphanumeric runs joined by `-`.
pub fn slugify(title: &str) -> String {
    let mut slug = String::with_capacity(title.len());
    let mut pending_dash = false;
    for c in title.chars() {
        if c.is_ascii_alphanumeric() {
            if pending_dash && !slug.is_empty() {
                slug.push('-');
            }
            pending_dash = false;
            slug.push(c.to_ascii_lowercase());
        } else {
            pending_dash = true;
        }
    }
    if slug.is_empty() {
        slug.push_str("untitled");
    }
    slug
}

/// Builds `<date>_<slug>` ids, appending `-2`, `-3`, ... to repeats.
pub fn assign_ids<'a>(keys: impl IntoIterator<Item = (NaiveDate, &'a str)>) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    keys.into_iter()
        .map(|(date, title)| {
            let base = format!("{}_{}", date.format("%Y-%m-%d"), slugify(title));
            let n = counts.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}-{n}")
            }
        })
        .collect()
}

/// Recovers the date prefix of an id produced by [`assign_ids`].
pub fn date_from_id(id: &str) -> Option<NaiveDate> {
    id.get(..10).and_then(parse_date)
}

/// Reads every manifest entry into a [`Document`], preserving manifest order.
pub fn load_corpus(manifest: &Manifest) -> Result<Vec<Document>, CorpusError> {
    let ids = assign_ids(manifest.entries.iter().map(|e| (e.date, e.title.as_str())));
    manifest
        .entries
        .iter()
        .zip(ids)
        .map(|(entry, id)| {
            let raw_text = fs::read_to_string(&entry.path).map_err(|source| CorpusError::Io {
                path: entry.path.clone(),
                source,
            })?;
            if raw_text.trim().is_empty() {
                return Err(CorpusError::EmptyDocument {
                    path: entry.path.clone(),
                });
            }
            Ok(Document {
                id,
                date: entry.date,
                title: entry.title.clone(),
                raw_text,
            })
        })
        .collect()
}

/// Number of documents per calendar year.
pub fn corpus_stats(docs: &[Document]) -> BTreeMap<i32, usize> {
    let mut counts = BTreeMap::new();
    for doc in docs {
        *counts.entry(doc.date.year()).or_insert(0) += 1;
    }
    counts
}
