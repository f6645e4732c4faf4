//! Answer metrics, run aggregation, classifier reports and oracle routing.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::classifier::ComplexityLabel;
use crate::corpus::{normalize_answer, QueryRecord};
use crate::labeler::{label_by_bias, label_by_outcome, LabeledQuery, OutcomeTriple};
use crate::strategies::{run_with_label, StrategyDeps, StrategyError, StrategyResult};

/// 1.0 when the normalized prediction equals some normalized gold.
pub fn exact_match(pred: &str, golds: &[String]) -> f64 {
    let pred = normalize_answer(pred);
    if golds.iter().any(|g| normalize_answer(g) == pred) {
        1.0
    } else {
        0.0
    }
}

fn f1_against(pred: &[&str], gold: &[&str]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.is_empty() && gold.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(n) = counts.get_mut(t) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best token-multiset F1 over the golds.
pub fn token_f1(pred: &str, golds: &[String]) -> f64 {
    let pred = normalize_answer(pred);
    let pred_tokens: Vec<&str> = pred.split_whitespace().collect();
    golds
        .iter()
        .map(|g| {
            let g = normalize_answer(g);
            f1_against(&pred_tokens, &g.split_whitespace().collect::<Vec<_>>())
        })
        .fold(0.0, f64::max)
}

/// 1.0 when some normalized gold is a substring of the normalized prediction.
pub fn accuracy_contains(pred: &str, golds: &[String]) -> f64 {
    let pred = normalize_answer(pred);
    if golds.iter().any(|g| pred.contains(&normalize_answer(g))) {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub em: f64,
    pub f1: f64,
    pub acc: f64,
}

/// Scores one answer; a missing answer scores zero everywhere.
pub fn score_answer(answer: Option<&str>, golds: &[String]) -> QueryScore {
    match answer {
        Some(a) => QueryScore {
            em: exact_match(a, golds),
            f1: token_f1(a, golds),
            acc: accuracy_contains(a, golds),
        },
        None => QueryScore {
            em: 0.0,
            f1: 0.0,
            acc: 0.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub queries: usize,
    pub em: f64,
    pub f1: f64,
    pub acc: f64,
    /// Mean retrieve-and-generate rounds per query.
    pub avg_steps: f64,
    /// Sum of rounds over all queries.
    pub total_steps: u64,
    /// Mean wall-clock seconds per query.
    pub avg_time: f64,
    /// `avg_time` over the single-step mean on the same queries.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rel_time: Option<f64>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EvalError {
    #[error("result for unknown query {0:?}")]
    UnknownQuery(String),
    #[error("more than one result for query {0:?}")]
    DuplicateResult(String),
    #[error("prediction and reference query ids differ (first difference: {0:?})")]
    IdMismatch(String),
}

/// Order-independent mean: values are summed in sorted order.
fn mean(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unweighted means over `results`.
///
/// `baseline_times` maps query ids to single-step elapsed seconds; `rel_time`
/// is reported only when every result's query has a baseline entry.
pub fn aggregate(
    results: &[StrategyResult],
    queries: &HashMap<&str, &QueryRecord>,
    baseline_times: Option<&HashMap<String, f64>>,
) -> Result<MetricRow, EvalError> {
    let mut seen = HashSet::new();
    let mut scores = Vec::with_capacity(results.len());
    for r in results {
        let q = queries
            .get(r.query_id.as_str())
            .ok_or_else(|| EvalError::UnknownQuery(r.query_id.clone()))?;
        if !seen.insert(r.query_id.as_str()) {
            return Err(EvalError::DuplicateResult(r.query_id.clone()));
        }
        scores.push(score_answer(r.answer.as_deref(), &q.gold_answers));
    }
    let avg_time = mean(results.iter().map(|r| r.elapsed).collect());
    let rel_time = baseline_times.and_then(|base| {
        let times: Option<Vec<f64>> = results.iter().map(|r| base.get(&r.query_id).copied()).collect();
        let base_mean = mean(times?);
        (!results.is_empty() && base_mean > 0.0).then(|| avg_time / base_mean)
    });
    Ok(MetricRow {
        queries: results.len(),
        em: mean(scores.iter().map(|s| s.em).collect()),
        f1: mean(scores.iter().map(|s| s.f1).collect()),
        acc: mean(scores.iter().map(|s| s.acc).collect()),
        avg_steps: mean(results.iter().map(|r| r.steps as f64).collect()),
        total_steps: results.iter().map(|r| r.steps as u64).sum(),
        avg_time,
        rel_time,
    })
}

/// One row per dataset, keyed by dataset id.
pub fn aggregate_by_dataset(
    results: &[StrategyResult],
    queries: &HashMap<&str, &QueryRecord>,
    baseline_times: Option<&HashMap<String, f64>>,
) -> Result<BTreeMap<String, MetricRow>, EvalError> {
    let mut groups: BTreeMap<String, Vec<StrategyResult>> = BTreeMap::new();
    for r in results {
        let q = queries
            .get(r.query_id.as_str())
            .ok_or_else(|| EvalError::UnknownQuery(r.query_id.clone()))?;
        groups.entry(q.dataset_id.clone()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(ds, rs)| Ok((ds, aggregate(&rs, queries, baseline_times)?)))
        .collect()
}

/// Counts indexed `[true label][predicted label]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: ComplexityLabel, predicted: ComplexityLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of queries with each true label.
    pub fn support(&self) -> [u64; 3] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn correct(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub accuracy: f64,
    /// Recall for true labels A, B, C; `None` when a label has no support.
    pub per_class_accuracy: [Option<f64>; 3],
    pub confusion: ConfusionMatrix,
}

pub fn classifier_report(
    preds: &[(String, ComplexityLabel)],
    reference: &[LabeledQuery],
) -> Result<ClassifierReport, EvalError> {
    let truth: HashMap<&str, ComplexityLabel> =
        reference.iter().map(|l| (l.query_id.as_str(), l.label)).collect();
    if truth.len() != reference.len() {
        let mut seen = HashSet::new();
        let dup = reference.iter().find(|l| !seen.insert(&l.query_id)).unwrap();
        return Err(EvalError::IdMismatch(dup.query_id.clone()));
    }
    let mut matrix = ConfusionMatrix::default();
    let mut seen = HashSet::new();
    for (id, predicted) in preds {
        let t = truth.get(id.as_str()).ok_or_else(|| EvalError::IdMismatch(id.clone()))?;
        if !seen.insert(id.as_str()) {
            return Err(EvalError::IdMismatch(id.clone()));
        }
        matrix.add(*t, *predicted);
    }
    if let Some(missing) = reference.iter().find(|l| !seen.contains(l.query_id.as_str())) {
        return Err(EvalError::IdMismatch(missing.query_id.clone()));
    }
    let support = matrix.support();
    let per_class_accuracy =
        std::array::from_fn(|i| (support[i] > 0).then(|| matrix.counts[i][i] as f64 / support[i] as f64));
    let accuracy = if matrix.total() == 0 {
        0.0
    } else {
        matrix.correct() as f64 / matrix.total() as f64
    };
    Ok(ClassifierReport {
        accuracy,
        per_class_accuracy,
        confusion: matrix,
    })
}

/// Label the oracle router would pick for `q`.
pub fn oracle_label(q: &QueryRecord, triple: &OutcomeTriple) -> ComplexityLabel {
    label_by_outcome(triple).unwrap_or_else(|| label_by_bias(q))
}

pub fn oracle_route(
    q: &QueryRecord,
    triple: &OutcomeTriple,
    deps: StrategyDeps<'_>,
) -> Result<StrategyResult, StrategyError> {
    run_with_label(q, oracle_label(q, triple), deps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelShare {
    pub label: ComplexityLabel,
    pub count: usize,
    pub percentage: f64,
    /// Mean seconds per query routed to this label; `None` with no queries.
    pub avg_time: Option<f64>,
}

/// Share of queries per routed label and their mean latency.
pub fn label_distribution(routed: &[(ComplexityLabel, f64)]) -> Vec<LabelShare> {
    ComplexityLabel::ALL
        .iter()
        .map(|&label| {
            let times: Vec<f64> = routed.iter().filter(|(l, _)| *l == label).map(|(_, t)| *t).collect();
            let count = times.len();
            LabelShare {
                label,
                count,
                percentage: if routed.is_empty() {
                    0.0
                } else {
                    100.0 * count as f64 / routed.len() as f64
                },
                avg_time: (count > 0).then(|| mean(times)),
            }
        })
        .collect()
}

/// Everything `evaluate` writes to its report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: String,
    pub overall: MetricRow,
    pub per_dataset: BTreeMap<String, MetricRow>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub classifier: Option<ClassifierReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label_distribution: Option<Vec<LabelShare>>,
    /// Effective configuration, as key/value strings.
    pub config: BTreeMap<String, String>,
}
