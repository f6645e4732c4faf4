use std::collections::{BTreeMap, HashSet};

use anyhow::anyhow;
use arag_core::corpus::QueryRecord;
use arag_core::labeler::{
    build_training_set, outcome_triple, write_training_set, LabelingMode, OutcomeTriple, Provenance,
    TrainingSetHeader,
};
use arag_core::strategies::{run_strategy, StrategyDeps, StrategyKind, StrategyResult};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    backend, check_backend_inputs, check_retriever_inputs, create_out_dir, failure_status, par_map,
    queries, retriever, strategy_config, templates, worker_count, write_id_list, write_jsonl, QueryFailure,
    EXCLUSION_FILE,
};
use crate::config::{RunConfig, SampleSize};
use crate::{Failure, FailureExt, Status};

/// Query positions chosen for labeling, each list in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    /// Run through all three strategies.
    pub outcome: Vec<usize>,
    /// Labeled from hop type only.
    pub bias_only: Vec<usize>,
}

/// Seeded per-dataset sample. Datasets are visited in sorted id order and
/// each dataset's queries are shuffled once; the first `per_dataset` go to
/// outcome labeling and the next `bias_extra` to bias-only labeling.
pub fn sample_queries(queries: &[QueryRecord], per_dataset: SampleSize, bias_extra: usize, seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_dataset: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, q) in queries.iter().enumerate() {
        by_dataset.entry(&q.dataset_id).or_default().push(i);
    }
    let mut outcome = Vec::new();
    let mut bias_only = Vec::new();
    for (_, mut idx) in by_dataset {
        idx.shuffle(&mut rng);
        let n = match per_dataset {
            SampleSize::All => idx.len(),
            SampleSize::Count(n) => n.min(idx.len()),
        };
        outcome.extend_from_slice(&idx[..n]);
        let m = bias_extra.min(idx.len() - n);
        bias_only.extend_from_slice(&idx[n..n + m]);
    }
    outcome.sort_unstable();
    bias_only.sort_unstable();
    Sample { outcome, bias_only }
}

#[derive(Serialize)]
struct LabelRun {
    query_id: String,
    no_retrieval: StrategyResult,
    single_step: StrategyResult,
    multi_step: StrategyResult,
}

pub fn run(config: &RunConfig) -> Result<Status, Failure> {
    let queries = queries(config)?;
    let mode = config.labeling_mode;
    let needs_outcomes = mode != LabelingMode::BiasOnly;
    if needs_outcomes {
        if config.sample_per_dataset == SampleSize::Count(0) {
            return Err(Failure::Usage(anyhow!(
                "sample_per_dataset is 0 but labeling_mode {mode} needs outcome labels"
            )));
        }
        check_retriever_inputs(config)?;
        check_backend_inputs(config)?;
    }
    create_out_dir(config)?;

    let sample = if !needs_outcomes && config.sample_per_dataset == SampleSize::Count(0) {
        Sample {
            outcome: Vec::new(),
            bias_only: (0..queries.len()).collect(),
        }
    } else {
        sample_queries(&queries, config.sample_per_dataset, config.bias_sample, config.seed)
    };

    let mut triples: Vec<OutcomeTriple> = Vec::new();
    let mut failures: Vec<QueryFailure> = Vec::new();
    let mut labeled_positions: Vec<usize> = sample.bias_only.clone();
    if needs_outcomes {
        let search = retriever(config)?;
        let backend = backend(config)?;
        let templates = templates(config)?;
        let strategy = strategy_config(config);
        let deps = StrategyDeps {
            retriever: &search,
            backend: backend.as_ref(),
            templates: &templates,
            config: &strategy,
        };
        let outcome_queries: Vec<&QueryRecord> = sample.outcome.iter().map(|&i| &queries[i]).collect();
        let runs = par_map(worker_count(config), &outcome_queries, |q| {
            let mut results = Vec::with_capacity(3);
            for kind in [StrategyKind::NoRetrieval, StrategyKind::SingleStep, StrategyKind::MultiStep] {
                results.push(run_strategy(q, kind, deps)?);
            }
            Ok::<_, arag_core::strategies::StrategyError>(results)
        })?;

        let mut label_runs = Vec::new();
        for ((q, pos), result) in outcome_queries.iter().zip(&sample.outcome).zip(runs) {
            match result {
                Ok(mut r) => {
                    let multi = r.pop().expect("three results");
                    let single = r.pop().expect("three results");
                    let none = r.pop().expect("three results");
                    triples.push(outcome_triple(q, &none, &single, &multi, config.gating_metric));
                    labeled_positions.push(*pos);
                    label_runs.push(LabelRun {
                        query_id: q.query_id.clone(),
                        no_retrieval: none,
                        single_step: single,
                        multi_step: multi,
                    });
                }
                Err(e) => failures.push(QueryFailure {
                    query_id: q.query_id.clone(),
                    error: e.to_string(),
                }),
            }
        }
        let status = failure_status(config, &failures, outcome_queries.len());
        if !failures.is_empty() {
            write_jsonl(&config.out.join("label_failures.jsonl"), &failures)?;
        }
        status?;
        write_jsonl(&config.triples_path(), &triples)?;
        write_jsonl(&config.out.join("label_runs.jsonl"), &label_runs)?;
    }

    labeled_positions.sort_unstable();
    let labeled_queries: Vec<QueryRecord> = labeled_positions.iter().map(|&i| queries[i].clone()).collect();
    let labels = build_training_set(&labeled_queries, &triples, mode).runtime()?;
    let header = TrainingSetHeader {
        mode,
        gating_metric: config.gating_metric,
        seed: config.seed,
    };
    write_training_set(config.training_set_path(), &header, &labels).runtime()?;

    // Every sampled query is kept out of evaluation, labeled or not.
    let mut excluded: Vec<usize> = sample.outcome.iter().chain(&sample.bias_only).copied().collect();
    excluded.sort_unstable();
    let excluded_ids: Vec<&str> = excluded.iter().map(|&i| queries[i].query_id.as_str()).collect();
    write_id_list(&config.out.join(EXCLUSION_FILE), &excluded_ids)?;

    let silver = labels.iter().filter(|l| l.provenance == Provenance::SilverOutcome).count();
    let mut counts = [0usize; 3];
    for l in &labels {
        counts[l.label.index()] += 1;
    }
    println!("mode\t{mode}");
    println!("sampled\t{}", sample.outcome.len() + sample.bias_only.len());
    println!("labeled\t{}", labels.len());
    println!("silver\t{silver}");
    println!("bias\t{}", labels.len() - silver);
    println!("labels A/B/C\t{}/{}/{}", counts[0], counts[1], counts[2]);
    if !failures.is_empty() {
        println!("failed\t{}", failures.len());
    }
    let distinct: HashSet<&str> = labels.iter().map(|l| l.query_id.as_str()).collect();
    debug_assert_eq!(distinct.len(), labels.len());
    Ok(if failures.is_empty() { Status::Complete } else { Status::Partial })
}
