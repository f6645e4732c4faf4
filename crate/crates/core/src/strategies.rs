//! The three answering strategies and label-based dispatch.
//!
//! * no retrieval: one generation from the question alone;
//! * single step: retrieve once with the question, generate once;
//! * multi step: alternate retrieval and generation, feeding each new
//!   intermediate sentence into the next retrieval query, until the
//!   generation carries the answer cue or the step cap is hit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::ComplexityLabel;
use crate::corpus::{Document, QueryRecord};
use crate::llm::{extract_answer, generate, GenerationRequest, GeneratorBackend, LlmError, PromptTemplates};
use crate::retriever::Retriever;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    NoRetrieval,
    SingleStep,
    MultiStep,
}

impl From<ComplexityLabel> for StrategyKind {
    fn from(label: ComplexityLabel) -> Self {
        match label {
            ComplexityLabel::A => StrategyKind::NoRetrieval,
            ComplexityLabel::B => StrategyKind::SingleStep,
            ComplexityLabel::C => StrategyKind::MultiStep,
        }
    }
}

impl StrategyKind {
    pub fn label(self) -> ComplexityLabel {
        match self {
            StrategyKind::NoRetrieval => ComplexityLabel::A,
            StrategyKind::SingleStep => ComplexityLabel::B,
            StrategyKind::MultiStep => ComplexityLabel::C,
        }
    }

    /// Largest number of retrieve-and-generate rounds the strategy may run.
    pub fn max_steps(self, config: &StrategyConfig) -> usize {
        match self {
            StrategyKind::NoRetrieval => 0,
            StrategyKind::SingleStep => 1,
            StrategyKind::MultiStep => config.max_steps,
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::NoRetrieval => "no_retrieval",
            StrategyKind::SingleStep => "single_step",
            StrategyKind::MultiStep => "multi_step",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStep {
    pub retrieved_doc_ids: Vec<String>,
    pub intermediate_text: String,
}

/// Per-step retrieval and generation history, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReasoningContext {
    pub steps: Vec<ContextStep>,
}

impl ReasoningContext {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn intermediate_texts(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.intermediate_text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyResult {
    pub query_id: String,
    pub strategy: StrategyKind,
    pub answer: Option<String>,
    /// Retrieve-and-generate rounds executed.
    pub steps: usize,
    /// Wall-clock seconds for the whole run.
    pub elapsed: f64,
    pub context: ReasoningContext,
    pub raw_generations: Vec<String>,
}

/// How the multi-step loop forms its retrieval query after the first step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalQueryMode {
    /// Question plus the most recent intermediate sentence.
    #[default]
    LatestSentence,
    /// Question plus every intermediate sentence so far.
    FullChain,
}

/// Which documents the multi-step prompt shows at step `i`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentWindow {
    /// Every document retrieved in steps `1..=i`, first-seen order, no repeats.
    #[default]
    Accumulated,
    /// Only the documents retrieved at step `i`.
    CurrentStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    /// Documents per retrieval call.
    pub k: usize,
    pub max_steps: usize,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub query_mode: RetrievalQueryMode,
    pub document_window: DocumentWindow,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            k: 3,
            max_steps: 5,
            max_new_tokens: 256,
            temperature: 0.0,
            stop_sequences: vec!["\n\n".to_string()],
            query_mode: RetrievalQueryMode::default(),
            document_window: DocumentWindow::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StrategyError {
    #[error("invalid strategy configuration: {0}")]
    InvalidConfig(String),
    #[error("query {query_id}: {strategy} failed at step {step}: {source}")]
    Backend {
        query_id: String,
        strategy: StrategyKind,
        step: usize,
        #[source]
        source: LlmError,
        /// Context accumulated before the failing call.
        partial: Box<ReasoningContext>,
    },
}

impl StrategyError {
    pub fn query_id(&self) -> Option<&str> {
        match self {
            StrategyError::Backend { query_id, .. } => Some(query_id),
            StrategyError::InvalidConfig(_) => None,
        }
    }
}

/// Everything a strategy run reads. All of it is shared and read-only.
#[derive(Clone, Copy)]
pub struct StrategyDeps<'a> {
    pub retriever: &'a dyn Retriever,
    pub backend: &'a dyn GeneratorBackend,
    pub templates: &'a PromptTemplates,
    pub config: &'a StrategyConfig,
}

impl StrategyDeps<'_> {
    fn request(&self, prompt: String) -> GenerationRequest {
        GenerationRequest {
            prompt,
            max_new_tokens: self.config.max_new_tokens,
            temperature: self.config.temperature,
            stop_sequences: self.config.stop_sequences.clone(),
        }
    }

    fn resolve(&self, ids: &[String]) -> Vec<&Document> {
        ids.iter().filter_map(|id| self.retriever.document(id)).collect()
    }
}

pub fn run_no_retrieval(q: &QueryRecord, deps: StrategyDeps<'_>) -> Result<StrategyResult, StrategyError> {
    let started = Instant::now();
    let prompt = deps.templates.no_retrieval(&q.question);
    let response = generate(deps.backend, &deps.request(prompt)).map_err(|source| StrategyError::Backend {
        query_id: q.query_id.clone(),
        strategy: StrategyKind::NoRetrieval,
        step: 0,
        source,
        partial: Box::default(),
    })?;
    Ok(StrategyResult {
        query_id: q.query_id.clone(),
        strategy: StrategyKind::NoRetrieval,
        answer: extract_answer(&response.text),
        steps: 0,
        elapsed: started.elapsed().as_secs_f64(),
        context: ReasoningContext::default(),
        raw_generations: vec![response.text],
    })
}

/// One retrieval with the raw question, then one generation. An empty
/// retrieval still produces a prompt, with a no-documents marker.
pub fn run_single_step(q: &QueryRecord, deps: StrategyDeps<'_>) -> Result<StrategyResult, StrategyError> {
    if deps.config.k == 0 {
        return Err(StrategyError::InvalidConfig("k must be at least 1".into()));
    }
    let started = Instant::now();
    let ids: Vec<String> = deps
        .retriever
        .retrieve(&q.question, deps.config.k)
        .into_iter()
        .map(|h| h.doc_id)
        .collect();
    let docs = deps.resolve(&ids);
    let prompt = deps.templates.single_step_or_marker(&q.question, &docs);
    let response = generate(deps.backend, &deps.request(prompt)).map_err(|source| StrategyError::Backend {
        query_id: q.query_id.clone(),
        strategy: StrategyKind::SingleStep,
        step: 1,
        source,
        partial: Box::default(),
    })?;
    Ok(StrategyResult {
        query_id: q.query_id.clone(),
        strategy: StrategyKind::SingleStep,
        answer: extract_answer(&response.text),
        steps: 1,
        elapsed: started.elapsed().as_secs_f64(),
        context: ReasoningContext {
            steps: vec![ContextStep {
                retrieved_doc_ids: ids,
                intermediate_text: response.text.clone(),
            }],
        },
        raw_generations: vec![response.text],
    })
}

fn retrieval_query(question: &str, chain: &[String], mode: RetrievalQueryMode) -> String {
    let extra = match mode {
        RetrievalQueryMode::LatestSentence => chain.last().cloned().unwrap_or_default(),
        RetrievalQueryMode::FullChain => chain.join(" "),
    };
    if extra.is_empty() {
        question.to_string()
    } else {
        format!("{question} {extra}")
    }
}

pub fn run_multi_step(q: &QueryRecord, deps: StrategyDeps<'_>) -> Result<StrategyResult, StrategyError> {
    let config = deps.config;
    if config.k == 0 || config.max_steps == 0 {
        return Err(StrategyError::InvalidConfig(
            "k and max_steps must be at least 1".into(),
        ));
    }
    let started = Instant::now();
    let mut context = ReasoningContext::default();
    let mut raw_generations = Vec::new();
    let mut chain: Vec<String> = Vec::new();
    let mut shown: Vec<String> = Vec::new();
    let mut answer = None;

    for step in 1..=config.max_steps {
        let query = retrieval_query(&q.question, &chain, config.query_mode);
        let ids: Vec<String> = deps
            .retriever
            .retrieve(&query, config.k)
            .into_iter()
            .map(|h| h.doc_id)
            .collect();
        let window = match config.document_window {
            DocumentWindow::Accumulated => {
                for id in &ids {
                    if !shown.contains(id) {
                        shown.push(id.clone());
                    }
                }
                deps.resolve(&shown)
            }
            DocumentWindow::CurrentStep => deps.resolve(&ids),
        };
        let prompt = deps.templates.multi_step(&q.question, &window, &chain);
        let response = match generate(deps.backend, &deps.request(prompt)) {
            Ok(r) => r,
            Err(source) => {
                return Err(StrategyError::Backend {
                    query_id: q.query_id.clone(),
                    strategy: StrategyKind::MultiStep,
                    step,
                    source,
                    partial: Box::new(context),
                })
            }
        };
        let text = response.text.trim().to_string();
        context.steps.push(ContextStep {
            retrieved_doc_ids: ids,
            intermediate_text: text.clone(),
        });
        raw_generations.push(response.text);
        if let Some(a) = extract_answer(&text) {
            answer = Some(a);
            break;
        }
        chain.push(text);
    }

    Ok(StrategyResult {
        query_id: q.query_id.clone(),
        strategy: StrategyKind::MultiStep,
        answer,
        steps: context.len(),
        elapsed: started.elapsed().as_secs_f64(),
        context,
        raw_generations,
    })
}

pub fn run_strategy(
    q: &QueryRecord,
    kind: StrategyKind,
    deps: StrategyDeps<'_>,
) -> Result<StrategyResult, StrategyError> {
    match kind {
        StrategyKind::NoRetrieval => run_no_retrieval(q, deps),
        StrategyKind::SingleStep => run_single_step(q, deps),
        StrategyKind::MultiStep => run_multi_step(q, deps),
    }
}

/// Runs the strategy a complexity label selects: A → no retrieval,
/// B → single step, C → multi step.
pub fn run_with_label(
    q: &QueryRecord,
    label: ComplexityLabel,
    deps: StrategyDeps<'_>,
) -> Result<StrategyResult, StrategyError> {
    run_strategy(q, StrategyKind::from(label), deps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::HopType;
    use crate::llm::ScriptedMock;
    use crate::retriever::{Bm25Params, ScoredDoc, SearchIndex, TokenizerConfig};
    use std::sync::Mutex;

    fn query(id: &str, question: &str) -> QueryRecord {
        QueryRecord {
            query_id: id.into(),
            question: question.into(),
            dataset_id: "toy".into(),
            hop_type: HopType::MultiHop,
            gold_answers: vec!["x".into()],
        }
    }

    fn corpus() -> SearchIndex {
        let docs = [
            ("d-logo", "Logo", "The company changed its logo to a flat sans serif font."),
            ("d-cabot", "John Cabot", "John Cabot explored the coast of North America for England."),
            ("d-son", "Sebastian Cabot", "Sebastian Cabot was the son of John Cabot."),
            ("d-gaytan", "Cesar Gaytan", "Cesar Gaytan was born in Guadalajara in North America."),
        ];
        SearchIndex::build(
            docs.iter()
                .map(|(id, t, x)| Document {
                    doc_id: id.to_string(),
                    title: t.to_string(),
                    text: x.to_string(),
                })
                .collect(),
            Bm25Params::default(),
            TokenizerConfig::default(),
        )
        .unwrap()
    }

    /// Records every retrieval query while delegating to a real index.
    struct Counting<'a> {
        inner: &'a SearchIndex,
        queries: Mutex<Vec<String>>,
    }

    impl<'a> Counting<'a> {
        fn new(inner: &'a SearchIndex) -> Self {
            Self {
                inner,
                queries: Mutex::new(Vec::new()),
            }
        }
        fn queries(&self) -> Vec<String> {
            self.queries.lock().unwrap().clone()
        }
    }

    impl Retriever for Counting<'_> {
        fn retrieve(&self, query: &str, k: usize) -> Vec<ScoredDoc> {
            self.queries.lock().unwrap().push(query.to_string());
            self.inner.retrieve(query, k)
        }
        fn document(&self, doc_id: &str) -> Option<&Document> {
            self.inner.document(doc_id)
        }
    }

    fn deps<'a>(
        retriever: &'a dyn Retriever,
        backend: &'a dyn GeneratorBackend,
        templates: &'a PromptTemplates,
        config: &'a StrategyConfig,
    ) -> StrategyDeps<'a> {
        StrategyDeps {
            retriever,
            backend,
            templates,
            config,
        }
    }

    #[test]
    fn no_retrieval_runs_without_retrieval() {
        let index = corpus();
        let counting = Counting::new(&index);
        let mock = ScriptedMock::default().with_default("Google changed its logo. So the answer is: Google.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let r = run_no_retrieval(&query("q", "Which logo?"), deps(&counting, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 0);
        assert!(r.context.is_empty());
        assert_eq!(r.answer.as_deref(), Some("Google"));
        assert_eq!(r.strategy, StrategyKind::NoRetrieval);
        assert!(counting.queries().is_empty());
        assert!(r.elapsed >= 0.0);

        let silent = ScriptedMock::default().with_default("I am not sure.");
        let r = run_no_retrieval(&query("q", "Which logo?"), deps(&counting, &silent, &t, &c)).unwrap();
        assert_eq!(r.answer, None);
        assert_eq!(r.steps, 0);
    }

    #[test]
    fn single_step_retrieves_once() {
        let index = corpus();
        let counting = Counting::new(&index);
        let mock = ScriptedMock::default()
            .rule("Cesar Gaytan was born in Guadalajara", "So the answer is: Guadalajara.")
            .with_default("no idea");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig { k: 1, ..StrategyConfig::default() };
        let q = query("q1", "Where was Gaytan born?");
        let r = run_single_step(&q, deps(&counting, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 1);
        assert_eq!(r.context.steps[0].retrieved_doc_ids, ["d-gaytan"]);
        assert_eq!(r.answer.as_deref(), Some("Guadalajara"));
        assert_eq!(counting.queries(), std::slice::from_ref(&q.question));
    }

    #[test]
    fn single_step_empty_retrieval_is_not_an_error() {
        let index = corpus();
        let mock = ScriptedMock::default()
            .rule(crate::llm::NO_DOCUMENTS_MARKER, "So the answer is: unknown.")
            .with_default("wrong branch");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let r = run_single_step(&query("q", "zzz qqq"), deps(&index, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 1);
        assert!(r.context.steps[0].retrieved_doc_ids.is_empty());
        assert_eq!(r.answer.as_deref(), Some("unknown"));
    }

    #[test]
    fn multi_step_three_rounds() {
        let index = corpus();
        let counting = Counting::new(&index);
        let q = query("q", "Who is the son of the navigator who explored North America?");
        let mock = ScriptedMock::default()
            .rule("A: The navigator is John Cabot. John Cabot's son is Sebastian Cabot.", "So the answer is: Sebastian Cabot.")
            .rule("A: The navigator is John Cabot.", "John Cabot's son is Sebastian Cabot.")
            .rule("[iterative retrieval]", "The navigator is John Cabot.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let r = run_multi_step(&q, deps(&counting, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 3);
        assert_eq!(r.answer.as_deref(), Some("Sebastian Cabot"));
        assert_eq!(
            r.context.intermediate_texts(),
            [
                "The navigator is John Cabot.",
                "John Cabot's son is Sebastian Cabot.",
                "So the answer is: Sebastian Cabot."
            ]
        );
        let queries = counting.queries();
        assert_eq!(queries.len(), 3);
        assert_eq!(queries[0], q.question);
        assert!(queries[1].contains("The navigator is John Cabot."));
        assert!(queries[2].contains("John Cabot's son is Sebastian Cabot."));
        assert!(!queries[2].contains("The navigator is John Cabot."));
    }

    #[test]
    fn multi_step_full_chain_query_mode() {
        let index = corpus();
        let counting = Counting::new(&index);
        let mock = ScriptedMock::default()
            .rule("A: one. two.", "So the answer is: done.")
            .rule("A: one.", "two.")
            .with_default("one.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig {
            query_mode: RetrievalQueryMode::FullChain,
            ..StrategyConfig::default()
        };
        let r = run_multi_step(&query("q", "cabot"), deps(&counting, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 3);
        assert_eq!(counting.queries()[2], "cabot one. two.");
    }

    #[test]
    fn multi_step_stops_at_cap() {
        let index = corpus();
        let counting = Counting::new(&index);
        let mock = ScriptedMock::default().with_default("Still thinking about Cabot.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig { max_steps: 4, ..StrategyConfig::default() };
        let r = run_multi_step(&query("q", "Cabot?"), deps(&counting, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 4);
        assert_eq!(r.answer, None);
        assert_eq!(counting.queries().len(), 4);
        assert_eq!(r.context.len(), 4);
    }

    #[test]
    fn multi_step_immediate_answer() {
        let index = corpus();
        let mock = ScriptedMock::default().with_default("So the answer is: Cabot.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let r = run_multi_step(&query("q", "Cabot?"), deps(&index, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 1);
        assert_eq!(r.answer.as_deref(), Some("Cabot"));
    }

    #[test]
    fn multi_step_dedups_documents_in_prompt() {
        let index = corpus();
        // Every step retrieves the same documents; the prompt must show each once.
        let mock = ScriptedMock::default()
            .rule("A: Cabot. Cabot.", "So the answer is: Cabot.")
            .with_default("Cabot.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let q = query("q", "John Cabot son");
        let r = run_multi_step(&q, deps(&index, &mock, &t, &c)).unwrap();
        assert_eq!(r.steps, 3);
        for step in &r.context.steps {
            assert!(!step.retrieved_doc_ids.is_empty());
        }
        let docs: Vec<&Document> = r.context.steps[0]
            .retrieved_doc_ids
            .iter()
            .map(|id| index.document(id).unwrap())
            .collect();
        let prompt = t.multi_step(&q.question, &docs, &["Cabot.".into(), "Cabot.".into()]);
        assert_eq!(prompt.matches("Sebastian Cabot was the son").count(), 1);
    }

    /// Answers the first call, then fails every later one.
    struct FailsAfterFirst(std::sync::atomic::AtomicUsize);

    impl GeneratorBackend for FailsAfterFirst {
        fn backend_id(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _: &GenerationRequest) -> Result<String, LlmError> {
            match self.0.fetch_add(1, std::sync::atomic::Ordering::SeqCst) {
                0 => Ok("First step.".into()),
                _ => Err(LlmError::Transport("connection reset".into())),
            }
        }
    }

    #[test]
    fn backend_failure_mid_loop_keeps_partial_context() {
        let index = corpus();
        let backend = FailsAfterFirst(Default::default());
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let err = run_multi_step(&query("q7", "Cabot?"), deps(&index, &backend, &t, &c)).unwrap_err();
        assert_eq!(err.query_id(), Some("q7"));
        match err {
            StrategyError::Backend { step, partial, source, .. } => {
                assert_eq!(step, 2);
                assert_eq!(partial.len(), 1);
                assert_eq!(partial.steps[0].intermediate_text, "First step.");
                assert!(matches!(source, LlmError::Transport(_)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dispatch_follows_label() {
        let index = corpus();
        let counting = Counting::new(&index);
        let mock = ScriptedMock::default().with_default("So the answer is: x.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let q = query("q", "Cabot?");
        let d = deps(&counting, &mock, &t, &c);
        let a = run_with_label(&q, ComplexityLabel::A, d).unwrap();
        assert_eq!((a.strategy, a.steps), (StrategyKind::NoRetrieval, 0));
        let b = run_with_label(&q, ComplexityLabel::B, d).unwrap();
        assert_eq!((b.strategy, b.steps), (StrategyKind::SingleStep, 1));
        let cc = run_with_label(&q, ComplexityLabel::C, d).unwrap();
        assert_eq!((cc.strategy, cc.steps), (StrategyKind::MultiStep, 1));
        assert_eq!(counting.queries().len(), 2);
        for l in ComplexityLabel::ALL {
            assert_eq!(StrategyKind::from(l).label(), l);
        }
        let bounds: Vec<usize> = ComplexityLabel::ALL
            .iter()
            .map(|&l| StrategyKind::from(l).max_steps(&c))
            .collect();
        assert!(bounds.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn invalid_config_rejected() {
        let index = corpus();
        let mock = ScriptedMock::default().with_default("x");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig { k: 0, ..StrategyConfig::default() };
        assert!(matches!(
            run_single_step(&query("q", "a"), deps(&index, &mock, &t, &c)),
            Err(StrategyError::InvalidConfig(_))
        ));
        let c = StrategyConfig { max_steps: 0, ..StrategyConfig::default() };
        assert!(matches!(
            run_multi_step(&query("q", "a"), deps(&index, &mock, &t, &c)),
            Err(StrategyError::InvalidConfig(_))
        ));
    }

    #[test]
    fn result_serializes_stably() {
        let index = corpus();
        let mock = ScriptedMock::default()
            .rule("A: Step one.", "So the answer is: Cabot.")
            .with_default("Step one.");
        let t = PromptTemplates::builtin();
        let c = StrategyConfig::default();
        let run = || {
            let mut r = run_multi_step(&query("q", "Cabot?"), deps(&index, &mock, &t, &c)).unwrap();
            r.elapsed = 0.0;
            serde_json::to_string(&r).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.contains(r#""strategy":"multi_step""#));
        let back: StrategyResult = serde_json::from_str(&a).unwrap();
        assert_eq!(back.steps, 2);
    }
}
