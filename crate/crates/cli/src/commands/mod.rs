pub mod evaluate;
pub mod index;
pub mod label;
pub mod report;
pub mod train;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use arag_core::corpus::{load_corpus, load_queries, QueryRecord};
use arag_core::llm::{GeneratorBackend, PromptTemplates, RemoteBackend, RemoteConfig, ScriptedMock};
use arag_core::retriever::{snapshot, Bm25Params, SearchIndex, TokenizerConfig};
use arag_core::strategies::{StrategyConfig, StrategyResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BackendSpec, RunConfig};
use crate::{Failure, FailureExt};

/// Name of the file `label` writes and `evaluate` reads to keep training
/// queries out of evaluation.
pub const EXCLUSION_FILE: &str = "train_query_ids.txt";

pub(crate) fn require_path<'a>(key: &str, value: Option<&'a PathBuf>) -> Result<&'a Path, Failure> {
    value
        .map(PathBuf::as_path)
        .ok_or_else(|| Failure::Usage(anyhow!("missing configuration key `{key}`")))
}

pub(crate) fn require_file(key: &str, path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(anyhow!("{key} file not found: {}", path.display())))
    }
}

pub(crate) fn create_out_dir(config: &RunConfig) -> Result<(), Failure> {
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("cannot create output directory {}", config.out.display()))
        .usage()
}

pub(crate) fn queries(config: &RunConfig) -> Result<Vec<QueryRecord>, Failure> {
    let path = require_path("queries", config.queries.as_ref())?;
    require_file("queries", path)?;
    load_queries(path).usage()
}

pub(crate) fn tokenizer(config: &RunConfig) -> TokenizerConfig {
    TokenizerConfig {
        stem: config.stem,
        remove_stopwords: config.stopwords,
    }
}

/// Checks that a retriever can be built, before any work starts.
pub(crate) fn check_retriever_inputs(config: &RunConfig) -> Result<(), Failure> {
    match (&config.index, &config.corpus) {
        (Some(index), _) => require_file("index", index),
        (None, Some(corpus)) => require_file("corpus", corpus),
        (None, None) => Err(Failure::Usage(anyhow!(
            "either `index` (a snapshot) or `corpus` must be configured"
        ))),
    }
}

/// Loads the index snapshot when `index` is set, otherwise builds one from
/// `corpus`.
pub(crate) fn retriever(config: &RunConfig) -> Result<SearchIndex, Failure> {
    check_retriever_inputs(config)?;
    if let Some(path) = &config.index {
        return snapshot::load(path)
            .with_context(|| format!("cannot load index snapshot {}", path.display()))
            .usage();
    }
    let corpus = config.corpus.as_ref().expect("checked above");
    let docs = load_corpus(corpus).usage()?;
    let params = Bm25Params {
        k1: config.bm25_k1,
        b: config.bm25_b,
    };
    SearchIndex::build(docs, params, tokenizer(config)).usage()
}

pub(crate) fn check_backend_inputs(config: &RunConfig) -> Result<(), Failure> {
    match &config.backend {
        None => Err(Failure::Usage(anyhow!("missing configuration key `backend`"))),
        Some(BackendSpec::Mock(path)) => require_file("mock script", path),
        Some(BackendSpec::Remote) => Ok(()),
    }
}

pub(crate) fn backend(config: &RunConfig) -> Result<Box<dyn GeneratorBackend>, Failure> {
    check_backend_inputs(config)?;
    match config.backend.as_ref().expect("checked above") {
        BackendSpec::Mock(path) => Ok(Box::new(ScriptedMock::load(path).usage()?)),
        BackendSpec::Remote => {
            let mut remote = RemoteConfig::new(&config.remote_base_url, &config.remote_model);
            remote.api_key_env = config.api_key_env.clone();
            remote.timeout = Duration::from_secs_f64(config.timeout_secs);
            remote.max_retries = config.max_retries;
            remote.max_in_flight = config.max_in_flight;
            Ok(Box::new(RemoteBackend::new(remote)))
        }
    }
}

pub(crate) fn templates(config: &RunConfig) -> Result<PromptTemplates, Failure> {
    match &config.templates {
        Some(dir) => PromptTemplates::load_dir(dir).usage(),
        None => Ok(PromptTemplates::builtin()),
    }
}

pub(crate) fn strategy_config(config: &RunConfig) -> StrategyConfig {
    StrategyConfig {
        k: config.k,
        max_steps: config.max_steps,
        max_new_tokens: config.max_new_tokens,
        temperature: config.temperature,
        query_mode: config.query_mode,
        document_window: config.document_window,
        ..StrategyConfig::default()
    }
}

/// Worker count, capped by the remote backend's in-flight limit.
pub(crate) fn worker_count(config: &RunConfig) -> usize {
    match config.backend {
        Some(BackendSpec::Remote) => config.workers.min(config.max_in_flight),
        _ => config.workers,
    }
}

/// Maps `f` over `items` on a pool of `workers` threads; output order
/// follows input order.
pub(crate) fn par_map<T, R, F>(workers: usize, items: &[T], f: F) -> Result<Vec<R>, Failure>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("cannot start worker pool")
        .runtime()?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

pub(crate) fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), Failure> {
    arag_core::corpus::write_jsonl(path, records)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).context("cannot serialize").runtime()?;
    text.push('\n');
    std::fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

pub fn read_trace(path: &Path) -> anyhow::Result<Vec<StrategyResult>> {
    let reader = BufReader::new(File::open(path).with_context(|| format!("cannot open trace {}", path.display()))?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: malformed trace line", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

pub(crate) fn write_id_list(path: &Path, ids: &[&str]) -> Result<(), Failure> {
    let mut out = std::io::BufWriter::new(
        File::create(path)
            .with_context(|| format!("cannot write {}", path.display()))
            .runtime()?,
    );
    for id in ids {
        writeln!(out, "{id}").runtime()?;
    }
    out.flush().runtime()
}

pub(crate) fn read_id_list(path: &Path) -> Result<HashSet<String>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .usage()?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

/// One query that could not be processed.
#[derive(Debug, Serialize)]
pub(crate) struct QueryFailure {
    pub query_id: String,
    pub error: String,
}

/// Decides the outcome of a batch run from its failure count.
pub(crate) fn failure_status(
    config: &RunConfig,
    failures: &[QueryFailure],
    total: usize,
) -> Result<crate::Status, Failure> {
    if failures.is_empty() {
        return Ok(crate::Status::Complete);
    }
    let fraction = failures.len() as f64 / total.max(1) as f64;
    for f in failures {
        tracing::warn!(query_id = %f.query_id, "query failed: {}", f.error);
    }
    if fraction > config.max_failure_fraction {
        return Err(Failure::Runtime(anyhow!(
            "{} of {} queries failed, above max_failure_fraction {}",
            failures.len(),
            total,
            config.max_failure_fraction
        )));
    }
    Ok(crate::Status::Partial)
}
