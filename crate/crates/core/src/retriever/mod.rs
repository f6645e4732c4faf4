//! BM25 sparse retrieval over an in-memory inverted index.

mod index;
pub mod snapshot;
mod tokenize;

use std::collections::HashMap;

pub use index::{build_index, indexed_text, Bm25Params, IndexError, InvertedIndex, Posting, ScoredDoc};
pub use tokenize::{tokenize, tokenize_with, TokenizerConfig};

use crate::corpus::Document;

/// Read-only document search, the seam between strategies and the index.
pub trait Retriever: Send + Sync {
    fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredDoc>;

    fn document(&self, doc_id: &str) -> Option<&Document>;
}

/// An inverted index together with the documents it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    index: InvertedIndex,
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl SearchIndex {
    pub fn build(
        docs: Vec<Document>,
        params: Bm25Params,
        tokenizer: TokenizerConfig,
    ) -> Result<Self, IndexError> {
        let index = InvertedIndex::build(&docs, params, tokenizer)?;
        Ok(Self::from_parts(index, docs))
    }

    pub(crate) fn from_parts(index: InvertedIndex, docs: Vec<Document>) -> Self {
        let by_id = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.doc_id.clone(), i))
            .collect();
        Self { index, docs, by_id }
    }

    pub fn index(&self) -> &InvertedIndex {
        &self.index
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }
}

impl Retriever for SearchIndex {
    fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
        self.index.retrieve(query, k)
    }

    fn document(&self, doc_id: &str) -> Option<&Document> {
        self.by_id.get(doc_id).map(|&i| &self.docs[i])
    }
}
