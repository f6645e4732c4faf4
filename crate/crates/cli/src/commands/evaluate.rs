use std::collections::{HashMap, HashSet};

use anyhow::{anyhow, Context};
use arag_core::classifier::{ClassifierModel, ComplexityLabel};
use arag_core::corpus::QueryRecord;
use arag_core::eval::{
    aggregate, aggregate_by_dataset, classifier_report, label_distribution, oracle_label, EvalReport,
};
use arag_core::labeler::{build_training_set, read_triples, LabelingMode, OutcomeTriple};
use arag_core::strategies::{run_strategy, run_with_label, StrategyDeps, StrategyKind, StrategyResult};

use super::{
    backend, check_backend_inputs, check_retriever_inputs, create_out_dir, failure_status, par_map,
    queries, read_id_list, read_trace, require_file, retriever, strategy_config, templates, worker_count,
    write_json, write_jsonl, QueryFailure, EXCLUSION_FILE,
};
use crate::config::{EvalMode, RunConfig};
use crate::{Failure, FailureExt, Status};

/// Queries left after removing the exclusion list: `exclude_ids` when set,
/// otherwise `<out>/train_query_ids.txt` if `label` wrote one there.
fn evaluation_queries(config: &RunConfig, all: Vec<QueryRecord>) -> Result<Vec<QueryRecord>, Failure> {
    let path = match &config.exclude_ids {
        Some(p) => {
            require_file("exclude_ids", p)?;
            Some(p.clone())
        }
        None => Some(config.out.join(EXCLUSION_FILE)).filter(|p| p.is_file()),
    };
    let Some(path) = path else { return Ok(all) };
    let excluded = read_id_list(&path)?;
    let kept: Vec<QueryRecord> = all.into_iter().filter(|q| !excluded.contains(&q.query_id)).collect();
    tracing::info!(
        excluded = excluded.len(),
        remaining = kept.len(),
        "excluding training queries listed in {}",
        path.display()
    );
    Ok(kept)
}

fn load_triples(config: &RunConfig) -> Result<HashMap<String, OutcomeTriple>, Failure> {
    let path = config.triples_path();
    require_file("triples", &path)?;
    let triples = read_triples(&path)
        .with_context(|| format!("cannot read triples {}", path.display()))
        .usage()?;
    Ok(triples.into_iter().map(|t| (t.query_id.clone(), t)).collect())
}

fn oracle_labels(
    queries: &[QueryRecord],
    triples: &HashMap<String, OutcomeTriple>,
) -> Result<Vec<ComplexityLabel>, Failure> {
    queries
        .iter()
        .map(|q| {
            triples
                .get(&q.query_id)
                .map(|t| oracle_label(q, t))
                .ok_or_else(|| Failure::Usage(anyhow!("no outcome triple for query {:?}", q.query_id)))
        })
        .collect()
}

pub fn run(config: &RunConfig) -> Result<Status, Failure> {
    let mode = config
        .mode
        .ok_or_else(|| Failure::Usage(anyhow!("evaluate needs --mode (no_retrieval, single, multi, adaptive, oracle)")))?;
    let queries = evaluation_queries(config, queries(config)?)?;
    check_retriever_inputs(config)?;
    check_backend_inputs(config)?;
    if mode == EvalMode::Adaptive {
        require_file("classifier", &config.classifier_path())?;
    }
    if mode == EvalMode::Oracle {
        require_file("triples", &config.triples_path())?;
    }
    if let Some(b) = &config.baseline_trace {
        require_file("baseline_trace", b)?;
    }
    create_out_dir(config)?;

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

    let routes: Option<Vec<ComplexityLabel>> = match mode {
        EvalMode::Adaptive => {
            let model = ClassifierModel::load(config.classifier_path())
                .with_context(|| format!("cannot load classifier {}", config.classifier_path().display()))
                .usage()?;
            Some(queries.iter().map(|q| model.predict(&q.question).label).collect())
        }
        EvalMode::Oracle => Some(oracle_labels(&queries, &load_triples(config)?)?),
        _ => None,
    };
    if let Some(routes) = &routes {
        let mut counts = [0usize; 3];
        for l in routes {
            counts[l.index()] += 1;
        }
        tracing::info!(a = counts[0], b = counts[1], c = counts[2], "{mode} routing label distribution");
    }

    let jobs: Vec<(usize, &QueryRecord)> = queries.iter().enumerate().collect();
    let outcomes = par_map(worker_count(config), &jobs, |&(i, q)| match (&routes, mode) {
        (Some(routes), _) => run_with_label(q, routes[i], deps),
        (None, EvalMode::NoRetrieval) => run_strategy(q, StrategyKind::NoRetrieval, deps),
        (None, EvalMode::Single) => run_strategy(q, StrategyKind::SingleStep, deps),
        (None, _) => run_strategy(q, StrategyKind::MultiStep, deps),
    })?;

    let mut results: Vec<StrategyResult> = Vec::with_capacity(outcomes.len());
    let mut routed: Vec<(ComplexityLabel, f64)> = Vec::new();
    let mut failures = Vec::new();
    for ((i, q), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(r) => {
                if let Some(routes) = &routes {
                    routed.push((routes[*i], r.elapsed));
                }
                results.push(r);
            }
            Err(e) => failures.push(QueryFailure {
                query_id: q.query_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let failures_path = config.out.join(format!("failures_{mode}.jsonl"));
    if failures.is_empty() {
        let _ = std::fs::remove_file(&failures_path);
    } else {
        write_jsonl(&failures_path, &failures)?;
    }
    let status = failure_status(config, &failures, queries.len())?;
    write_jsonl(&config.out.join(format!("trace_{mode}.jsonl")), &results)?;

    let by_id: HashMap<&str, &QueryRecord> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
    let baseline: Option<HashMap<String, f64>> = match (&config.baseline_trace, mode) {
        (Some(path), _) => Some(
            read_trace(path)
                .usage()?
                .into_iter()
                .map(|r| (r.query_id, r.elapsed))
                .collect(),
        ),
        (None, EvalMode::Single) => Some(results.iter().map(|r| (r.query_id.clone(), r.elapsed)).collect()),
        (None, _) => None,
    };
    let overall = aggregate(&results, &by_id, baseline.as_ref()).runtime()?;
    let per_dataset = aggregate_by_dataset(&results, &by_id, baseline.as_ref()).runtime()?;

    let classifier = match (&routes, mode) {
        (Some(routes), EvalMode::Adaptive) if config.triples_path().is_file() => {
            let triples = load_triples(config)?;
            let covered: HashSet<&str> = queries
                .iter()
                .filter(|q| triples.contains_key(&q.query_id))
                .map(|q| q.query_id.as_str())
                .collect();
            if covered.len() == queries.len() {
                let triple_list: Vec<OutcomeTriple> = queries.iter().map(|q| triples[&q.query_id].clone()).collect();
                let reference = build_training_set(&queries, &triple_list, LabelingMode::Full).runtime()?;
                let preds: Vec<(String, ComplexityLabel)> =
                    queries.iter().zip(routes).map(|(q, l)| (q.query_id.clone(), *l)).collect();
                Some(classifier_report(&preds, &reference).runtime()?)
            } else {
                tracing::info!("triples do not cover every evaluated query; skipping classifier report");
                None
            }
        }
        _ => None,
    };

    let report = EvalReport {
        mode: mode.to_string(),
        overall,
        per_dataset,
        classifier,
        label_distribution: routes.as_ref().map(|_| label_distribution(&routed)),
        config: config.snapshot(),
    };
    write_json(&config.out.join(format!("report_{mode}.json")), &report)?;

    let o = &report.overall;
    println!(
        "{mode}\tqueries {}\tEM {:.4}\tF1 {:.4}\tAcc {:.4}\tsteps {:.3}\ttime {:.4}s",
        o.queries, o.em, o.f1, o.acc, o.avg_steps, o.avg_time
    );
    if let Some(c) = &report.classifier {
        println!("classifier_accuracy\t{:.4}", c.accuracy);
    }
    Ok(status)
}
