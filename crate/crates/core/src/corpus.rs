//! Corpus and query-set ingestion, plus the answer normalization shared by
//! every metric downstream.
//!
//! Both file kinds are JSONL: one JSON object per line. Blank lines are
//! skipped; everything else must parse or the load fails with the 1-based
//! line number of the offending record.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate id {id:?}")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },
    #[error("{path}:{line}: query {query_id:?} has no gold answers")]
    EmptyGoldAnswers {
        path: PathBuf,
        line: usize,
        query_id: String,
    },
    #[error(
        "{path}:{line}: dataset {dataset_id:?} mixes hop types ({first} earlier, {found} here)"
    )]
    InconsistentHopType {
        path: PathBuf,
        line: usize,
        dataset_id: String,
        first: HopType,
        found: HopType,
    },
}

/// One retrievable text unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HopType {
    SingleHop,
    MultiHop,
}

impl std::fmt::Display for HopType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HopType::SingleHop => "single_hop",
            HopType::MultiHop => "multi_hop",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub query_id: String,
    pub question: String,
    pub dataset_id: String,
    pub hop_type: HopType,
    pub gold_answers: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    /// Mean document length in tokens; 0 for an empty corpus.
    pub avg_doc_len: f64,
}

impl CorpusStats {
    pub fn from_lengths(lengths: &[u32]) -> Self {
        let total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_len = if lengths.is_empty() {
            0.0
        } else {
            total as f64 / lengths.len() as f64
        };
        Self {
            doc_count: lengths.len(),
            avg_doc_len,
        }
    }
}

fn read_jsonl<T, F>(path: &Path, mut on_record: F) -> Result<(), CorpusError>
where
    T: serde::de::DeserializeOwned,
    F: FnMut(usize, T) -> Result<(), CorpusError>,
{
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let record: T = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        on_record(line_no, record)?;
    }
    Ok(())
}

/// Loads a JSONL corpus of `{doc_id, title, text}` objects in file order.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>, CorpusError> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    read_jsonl(path, |line, doc: Document| {
        if doc.text.trim().is_empty() {
            return Err(CorpusError::Malformed {
                path: path.to_path_buf(),
                line,
                message: format!("document {:?} has empty text", doc.doc_id),
            });
        }
        if !seen.insert(doc.doc_id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: doc.doc_id,
            });
        }
        docs.push(doc);
        Ok(())
    })?;
    Ok(docs)
}

/// Loads a JSONL query set, enforcing non-empty gold answers, unique ids and
/// one hop type per dataset.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, CorpusError> {
    let path = path.as_ref();
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    let mut hop_by_dataset: HashMap<String, HopType> = HashMap::new();
    read_jsonl(path, |line, q: QueryRecord| {
        if q.gold_answers.is_empty() {
            return Err(CorpusError::EmptyGoldAnswers {
                path: path.to_path_buf(),
                line,
                query_id: q.query_id,
            });
        }
        if !seen.insert(q.query_id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                line,
                id: q.query_id,
            });
        }
        let first = *hop_by_dataset
            .entry(q.dataset_id.clone())
            .or_insert(q.hop_type);
        if first != q.hop_type {
            return Err(CorpusError::InconsistentHopType {
                path: path.to_path_buf(),
                line,
                dataset_id: q.dataset_id,
                first,
                found: q.hop_type,
            });
        }
        queries.push(q);
        Ok(())
    })?;
    Ok(queries)
}

/// Writes records as JSONL, one object per line.
pub fn write_jsonl<T: Serialize>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = T>,
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercase, strip ASCII punctuation, drop the articles "a"/"an"/"the" as
/// whole tokens and collapse whitespace.
pub fn normalize_answer(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    stripped
        .split_whitespace()
        .filter(|tok| !ARTICLES.contains(tok))
        .collect::<Vec<_>>()
        .join(" ")
}
