use anyhow::Context;
use arag_core::corpus::load_corpus;
use arag_core::retriever::{snapshot, Bm25Params, SearchIndex};

use super::{create_out_dir, require_file, require_path, tokenizer};
use crate::config::RunConfig;
use crate::{Failure, FailureExt, Status};

/// Builds the index from `corpus` and writes the snapshot to `index`
/// (default `<out>/index.bin`).
pub fn run(config: &RunConfig) -> Result<Status, Failure> {
    let corpus = require_path("corpus", config.corpus.as_ref())?;
    require_file("corpus", corpus)?;
    let target = config.index_path();

    let docs = load_corpus(corpus).usage()?;
    let params = Bm25Params {
        k1: config.bm25_k1,
        b: config.bm25_b,
    };
    let search = SearchIndex::build(docs, params, tokenizer(config)).usage()?;
    if config.index.is_none() {
        create_out_dir(config)?;
    }
    snapshot::save(&search, &target)
        .with_context(|| format!("cannot write index snapshot {}", target.display()))
        .runtime()?;

    let stats = search.index().stats();
    println!("doc_count\t{}", stats.doc_count);
    println!("avg_doc_len\t{:.4}", stats.avg_doc_len);
    println!("terms\t{}", search.index().term_count());
    println!("snapshot\t{}", target.display());
    Ok(Status::Complete)
}
