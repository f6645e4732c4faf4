use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::tokenize::{tokenize_with, TokenizerConfig};
use crate::corpus::{CorpusStats, Document};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum IndexError {
    #[error("duplicate doc_id {0:?}")]
    DuplicateDocId(String),
    #[error("document ordinal {ordinal} out of range (corpus has {doc_count} documents)")]
    OrdinalOutOfRange { ordinal: usize, doc_count: usize },
    #[error("invalid BM25 parameters: k1 = {k1}, b = {b}")]
    InvalidParams { k1: f64, b: f64 },
    #[error("document {0:?} is longer than the index supports")]
    DocumentTooLong(String),
}

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(self) -> Result<Self, IndexError> {
        if self.k1.is_finite() && self.k1 > 0.0 && (0.0..=1.0).contains(&self.b) {
            Ok(self)
        } else {
            Err(IndexError::InvalidParams {
                k1: self.k1,
                b: self.b,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term → postings map over a fixed document set.
///
/// Postings lists are sorted by document ordinal with one entry per
/// document, and every stored term frequency is at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) postings: HashMap<String, Vec<Posting>>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) doc_ids: Vec<String>,
    pub(crate) stats: CorpusStats,
    pub(crate) params: Bm25Params,
    pub(crate) tokenizer: TokenizerConfig,
}

/// One ranked hit. Ranks start at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// The text that gets indexed for a document: title followed by body.
pub fn indexed_text(doc: &Document) -> String {
    if doc.title.is_empty() {
        doc.text.clone()
    } else {
        format!("{}\n{}", doc.title, doc.text)
    }
}

impl InvertedIndex {
    pub fn build(
        docs: &[Document],
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    ) -> Result<Self, IndexError> {
        let params = params.validate()?;
        let mut seen = HashSet::with_capacity(docs.len());
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut doc_ids = Vec::with_capacity(docs.len());

        for (ordinal, doc) in docs.iter().enumerate() {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(IndexError::DuplicateDocId(doc.doc_id.clone()));
            }
            let terms = tokenize_with(&indexed_text(doc), tokenizer);
            let len = u32::try_from(terms.len())
                .map_err(|_| IndexError::DocumentTooLong(doc.doc_id.clone()))?;
            let mut counts: HashMap<String, u32> = HashMap::new();
            for term in terms {
                *counts.entry(term).or_default() += 1;
            }
            let ordinal = ordinal as u32;
            for (term, tf) in counts {
                // Ordinals are visited in increasing order, so each list stays sorted.
                postings
                    .entry(term)
                    .or_default()
                    .push(Posting { doc: ordinal, tf });
            }
            doc_lengths.push(len);
            doc_ids.push(doc.doc_id.clone());
        }

        let stats = CorpusStats::from_lengths(&doc_lengths);
        Ok(Self {
            postings,
            doc_lengths,
            doc_ids,
            stats,
            params,
            tokenizer,
        })
    }

    pub fn stats(&self) -> CorpusStats {
        self.stats
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn tokenizer(&self) -> TokenizerConfig {
        self.tokenizer
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, ordinal: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_lengths[ordinal]);
        let avgdl = self.stats.avg_doc_len;
        idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * dl / avgdl))
    }

    /// BM25 score of one document. Repeated query terms contribute once per
    /// occurrence.
    pub fn score(&self, query_terms: &[String], ordinal: usize) -> Result<f64, IndexError> {
        if ordinal >= self.doc_count() {
            return Err(IndexError::OrdinalOutOfRange {
                ordinal,
                doc_count: self.doc_count(),
            });
        }
        let mut score = 0.0;
        for term in query_terms {
            let list = self.postings(term);
            if let Ok(pos) = list.binary_search_by_key(&(ordinal as u32), |p| p.doc) {
                score += self.term_weight(self.idf(list.len()), list[pos].tf, ordinal);
            }
        }
        Ok(score)
    }

    /// Top-`k` documents with a positive score, ordered by score descending
    /// and then by ordinal ascending.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
        if k == 0 || self.doc_count() == 0 {
            return Vec::new();
        }
        let terms = tokenize_with(query, self.tokenizer);
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in &terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = self.idf(list.len());
            for p in list {
                let ordinal = p.doc as usize;
                *scores.entry(ordinal).or_insert(0.0) += self.term_weight(idf, p.tf, ordinal);
            }
        }
        let mut hits: Vec<(usize, f64)> = scores.into_iter().filter(|&(_, s)| s > 0.0).collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits.into_iter()
            .enumerate()
            .map(|(i, (ordinal, score))| ScoredDoc {
                doc_id: self.doc_ids[ordinal].clone(),
                score,
                rank: i + 1,
            })
            .collect()
    }
}

pub fn build_index(docs: &[Document], params: Bm25Params) -> Result<InvertedIndex, IndexError> {
    InvertedIndex::build(docs, params, TokenizerConfig::default())
}
