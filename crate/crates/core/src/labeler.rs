//! Automatic training labels for the complexity classifier.
//!
//! A query's silver label is the cheapest strategy that answered it
//! correctly. Queries no strategy solved fall back to their dataset's hop
//! type: B for single-hop, C for multi-hop.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::ComplexityLabel;
use crate::corpus::{HopType, QueryRecord};
use crate::eval::{accuracy_contains, exact_match};
use crate::strategies::StrategyResult;

/// Which of the three strategies answered a query correctly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeTriple {
    pub query_id: String,
    pub correct_no_retrieval: bool,
    pub correct_single: bool,
    pub correct_multi: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SilverOutcome,
    InductiveBias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledQuery {
    pub query_id: String,
    pub label: ComplexityLabel,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelingMode {
    /// Silver label when some strategy succeeded, bias label otherwise.
    #[default]
    Full,
    /// Silver labels only; unsolved queries are dropped.
    SilverOnly,
    /// Bias labels for every query.
    BiasOnly,
}

/// Metric that decides whether a strategy "answered correctly".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatingMetric {
    #[default]
    Em,
    Acc,
}

macro_rules! snake_case_str {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(match self { $(<$ty>::$variant => $name),+ })
            }
        }

        impl std::str::FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(<$ty>::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?} (expected one of: {})",
                        [$($name),+].join(", ")
                    )),
                }
            }
        }
    };
}

snake_case_str!(LabelingMode { Full => "full", SilverOnly => "silver_only", BiasOnly => "bias_only" });
snake_case_str!(GatingMetric { Em => "em", Acc => "acc" });
snake_case_str!(Provenance { SilverOutcome => "silver_outcome", InductiveBias => "inductive_bias" });

impl GatingMetric {
    /// Whether `answer` counts as correct; a missing answer never does.
    pub fn is_correct(self, answer: Option<&str>, golds: &[String]) -> bool {
        let Some(answer) = answer else { return false };
        let score = match self {
            GatingMetric::Em => exact_match(answer, golds),
            GatingMetric::Acc => accuracy_contains(answer, golds),
        };
        score == 1.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabelerError {
    #[error("outcome triple refers to unknown query {0:?}")]
    UnknownQuery(String),
    #[error("more than one outcome triple for query {0:?}")]
    DuplicateTriple(String),
    #[error("duplicate query id {0:?} in input")]
    DuplicateQuery(String),
    #[error("training-set I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("training set line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Cheapest strategy that answered correctly, if any.
pub fn label_by_outcome(t: &OutcomeTriple) -> Option<ComplexityLabel> {
    if t.correct_no_retrieval {
        Some(ComplexityLabel::A)
    } else if t.correct_single {
        Some(ComplexityLabel::B)
    } else if t.correct_multi {
        Some(ComplexityLabel::C)
    } else {
        None
    }
}

pub fn label_by_bias(q: &QueryRecord) -> ComplexityLabel {
    match q.hop_type {
        HopType::SingleHop => ComplexityLabel::B,
        HopType::MultiHop => ComplexityLabel::C,
    }
}

/// Grades the three strategy runs of one query.
pub fn outcome_triple(
    q: &QueryRecord,
    no_retrieval: &StrategyResult,
    single: &StrategyResult,
    multi: &StrategyResult,
    metric: GatingMetric,
) -> OutcomeTriple {
    let ok = |r: &StrategyResult| metric.is_correct(r.answer.as_deref(), &q.gold_answers);
    OutcomeTriple {
        query_id: q.query_id.clone(),
        correct_no_retrieval: ok(no_retrieval),
        correct_single: ok(single),
        correct_multi: ok(multi),
    }
}

/// Labels `queries` in input order.
///
/// A query without a triple has no outcome evidence: it gets its bias label
/// in full mode and is dropped in silver-only mode.
pub fn build_training_set(
    queries: &[QueryRecord],
    triples: &[OutcomeTriple],
    mode: LabelingMode,
) -> Result<Vec<LabeledQuery>, LabelerError> {
    let mut seen = HashSet::new();
    for q in queries {
        if !seen.insert(q.query_id.as_str()) {
            return Err(LabelerError::DuplicateQuery(q.query_id.clone()));
        }
    }
    let mut by_id: HashMap<&str, &OutcomeTriple> = HashMap::new();
    for t in triples {
        if !seen.contains(t.query_id.as_str()) {
            return Err(LabelerError::UnknownQuery(t.query_id.clone()));
        }
        if by_id.insert(&t.query_id, t).is_some() {
            return Err(LabelerError::DuplicateTriple(t.query_id.clone()));
        }
    }

    let bias = |q: &QueryRecord| LabeledQuery {
        query_id: q.query_id.clone(),
        label: label_by_bias(q),
        provenance: Provenance::InductiveBias,
    };
    let silver = |q: &QueryRecord| {
        by_id
            .get(q.query_id.as_str())
            .and_then(|t| label_by_outcome(t))
            .map(|label| LabeledQuery {
                query_id: q.query_id.clone(),
                label,
                provenance: Provenance::SilverOutcome,
            })
    };
    Ok(queries
        .iter()
        .filter_map(|q| match mode {
            LabelingMode::Full => Some(silver(q).unwrap_or_else(|| bias(q))),
            LabelingMode::SilverOnly => silver(q),
            LabelingMode::BiasOnly => Some(bias(q)),
        })
        .collect())
}

/// First line of a training-set file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSetHeader {
    pub mode: LabelingMode,
    pub gating_metric: GatingMetric,
    pub seed: u64,
}

pub fn write_training_set(
    path: impl AsRef<Path>,
    header: &TrainingSetHeader,
    labels: &[LabeledQuery],
) -> Result<(), LabelerError> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for l in labels {
        serde_json::to_writer(&mut out, l).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_training_set(
    path: impl AsRef<Path>,
) -> Result<(TrainingSetHeader, Vec<LabeledQuery>), LabelerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut header = None;
    let mut labels = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| LabelerError::Malformed {
            line: lineno,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(malformed)?);
            continue;
        }
        let l: LabeledQuery = serde_json::from_str(&line).map_err(malformed)?;
        if !ids.insert(l.query_id.clone()) {
            return Err(LabelerError::Malformed {
                line: lineno,
                message: format!("duplicate query id {:?}", l.query_id),
            });
        }
        labels.push(l);
    }
    let header = header.ok_or(LabelerError::Malformed {
        line: 1,
        message: "missing header line".into(),
    })?;
    Ok((header, labels))
}

pub fn read_triples(path: impl AsRef<Path>) -> Result<Vec<OutcomeTriple>, LabelerError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LabelerError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triple(id: &str, a: bool, b: bool, c: bool) -> OutcomeTriple {
        OutcomeTriple {
            query_id: id.into(),
            correct_no_retrieval: a,
            correct_single: b,
            correct_multi: c,
        }
    }

    fn query(id: &str, hop: HopType) -> QueryRecord {
        QueryRecord {
            query_id: id.into(),
            question: format!("question {id}"),
            dataset_id: "d".into(),
            hop_type: hop,
            gold_answers: vec!["x".into()],
        }
    }

    #[test]
    fn outcome_examples() {
        assert_eq!(label_by_outcome(&triple("q", true, true, true)), Some(ComplexityLabel::A));
        assert_eq!(label_by_outcome(&triple("q", false, true, true)), Some(ComplexityLabel::B));
        assert_eq!(label_by_outcome(&triple("q", false, false, false)), None);
    }

    #[test]
    fn bias_examples() {
        assert_eq!(label_by_bias(&query("q", HopType::SingleHop)), ComplexityLabel::B);
        assert_eq!(label_by_bias(&query("q", HopType::MultiHop)), ComplexityLabel::C);
    }

    fn four_queries() -> (Vec<QueryRecord>, Vec<OutcomeTriple>) {
        let queries = vec![
            query("none_single", HopType::SingleHop),
            query("none_multi", HopType::MultiHop),
            query("all", HopType::SingleHop),
            query("only_multi", HopType::MultiHop),
        ];
        let triples = vec![
            triple("only_multi", false, false, true),
            triple("all", true, true, true),
            triple("none_multi", false, false, false),
            triple("none_single", false, false, false),
        ];
        (queries, triples)
    }

    #[test]
    fn full_mode_on_four_queries() {
        let (queries, triples) = four_queries();
        let got = build_training_set(&queries, &triples, LabelingMode::Full).unwrap();
        let got: Vec<_> = got.iter().map(|l| (l.query_id.as_str(), l.label, l.provenance)).collect();
        use ComplexityLabel::*;
        use Provenance::*;
        assert_eq!(
            got,
            [
                ("none_single", B, InductiveBias),
                ("none_multi", C, InductiveBias),
                ("all", A, SilverOutcome),
                ("only_multi", C, SilverOutcome),
            ]
        );
    }

    #[test]
    fn silver_only_drops_unsolved() {
        let (queries, triples) = four_queries();
        let got = build_training_set(&queries, &triples, LabelingMode::SilverOnly).unwrap();
        let labels: Vec<_> = got.iter().map(|l| l.label).collect();
        assert_eq!(labels, [ComplexityLabel::A, ComplexityLabel::C]);
    }

    #[test]
    fn bias_only_never_emits_a() {
        let (queries, triples) = four_queries();
        let got = build_training_set(&queries, &triples, LabelingMode::BiasOnly).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got.iter().all(|l| l.label != ComplexityLabel::A && l.provenance == Provenance::InductiveBias));
    }

    #[test]
    fn rejects_unknown_and_duplicate_triples() {
        let (queries, mut triples) = four_queries();
        triples.push(triple("ghost", true, false, false));
        assert!(matches!(
            build_training_set(&queries, &triples, LabelingMode::Full),
            Err(LabelerError::UnknownQuery(id)) if id == "ghost"
        ));
        let (queries, mut triples) = four_queries();
        triples.push(triple("all", false, false, false));
        assert!(matches!(
            build_training_set(&queries, &triples, LabelingMode::Full),
            Err(LabelerError::DuplicateTriple(_))
        ));
    }

    #[test]
    fn missing_triple_falls_back_to_bias_in_full_mode() {
        let queries = vec![query("q", HopType::MultiHop)];
        let full = build_training_set(&queries, &[], LabelingMode::Full).unwrap();
        assert_eq!(full[0].label, ComplexityLabel::C);
        assert!(build_training_set(&queries, &[], LabelingMode::SilverOnly).unwrap().is_empty());
    }

    #[test]
    fn gating_metric_judges_answers() {
        let golds = vec!["Sebastian Cabot".to_string()];
        assert!(GatingMetric::Em.is_correct(Some("the Sebastian Cabot."), &golds));
        assert!(!GatingMetric::Em.is_correct(Some("Sebastian Cabot of Venice"), &golds));
        assert!(GatingMetric::Acc.is_correct(Some("Sebastian Cabot of Venice"), &golds));
        assert!(!GatingMetric::Acc.is_correct(None, &golds));
    }

    #[test]
    fn names_round_trip() {
        for m in [LabelingMode::Full, LabelingMode::SilverOnly, LabelingMode::BiasOnly] {
            assert_eq!(m.to_string().parse::<LabelingMode>().unwrap(), m);
        }
        assert_eq!("acc".parse::<GatingMetric>().unwrap(), GatingMetric::Acc);
        assert!("f1".parse::<GatingMetric>().is_err());
    }

    #[test]
    fn training_set_file_round_trip() {
        let (queries, triples) = four_queries();
        let labels = build_training_set(&queries, &triples, LabelingMode::Full).unwrap();
        let header = TrainingSetHeader {
            mode: LabelingMode::Full,
            gating_metric: GatingMetric::Acc,
            seed: 17,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("train.jsonl");
        write_training_set(&path, &header, &labels).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"mode":"full","gating_metric":"acc","seed":17}"#
        );
        assert_eq!(read_training_set(&path).unwrap(), (header, labels));

        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_training_set(&path), Err(LabelerError::Malformed { .. })));
    }

    proptest! {
        #[test]
        fn priority_chain(b in any::<bool>(), c in any::<bool>()) {
            let before = label_by_outcome(&triple("q", false, b, c));
            let after = label_by_outcome(&triple("q", true, b, c));
            prop_assert_eq!(after, Some(ComplexityLabel::A));
            prop_assert!(before != Some(ComplexityLabel::A));
        }

        #[test]
        fn full_mode_total_and_provenance_partition(
            spec in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()), 0..30)
        ) {
            let mut queries = Vec::new();
            let mut triples = Vec::new();
            for (i, &(multi, has_triple, a, b, c)) in spec.iter().enumerate() {
                let id = format!("q{i}");
                queries.push(query(&id, if multi { HopType::MultiHop } else { HopType::SingleHop }));
                if has_triple {
                    triples.push(triple(&id, a, b, c));
                }
            }
            let labels = build_training_set(&queries, &triples, LabelingMode::Full).unwrap();
            prop_assert_eq!(labels.len(), queries.len());
            for (q, l) in queries.iter().zip(&labels) {
                prop_assert_eq!(&q.query_id, &l.query_id);
                let t = triples.iter().find(|t| t.query_id == q.query_id);
                match l.provenance {
                    Provenance::SilverOutcome => prop_assert_eq!(Some(l.label), t.and_then(label_by_outcome)),
                    Provenance::InductiveBias => {
                        prop_assert_eq!(l.label, label_by_bias(q));
                        prop_assert!(t.and_then(label_by_outcome).is_none());
                    }
                }
            }
        }
    }
}
