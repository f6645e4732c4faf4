//! Scripted-mock fixtures shared by the CLI and acceptance tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

/// One fixture query and how the mock treats it.
#[derive(Debug, Clone)]
pub struct Case {
    pub dataset: &'static str,
    pub multi_hop: bool,
    /// Whether the no-retrieval, single-step and multi-step runs answer correctly.
    pub correct: (bool, bool, bool),
    /// Rounds the multi-step loop takes before emitting the answer cue.
    pub multi_steps: usize,
}

impl Case {
    fn new(dataset: &'static str, multi_hop: bool, correct: (bool, bool, bool), multi_steps: usize) -> Self {
        Self {
            dataset,
            multi_hop,
            correct,
            multi_steps,
        }
    }
}

/// 60 queries, 20 per true complexity:
/// * 0..20, single-hop "squad": solvable without retrieval;
/// * 20..40, single-hop "nq": 15 need one retrieval, 5 unsolved;
/// * 40..60, multi-hop "hotpot": 15 need the multi-step loop, 5 unsolved.
///
/// The multi-step loop takes 1 round on the single-hop queries and 3 on the
/// multi-hop ones.
pub fn sixty_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    for i in 0..20 {
        let correct = match i {
            0..=9 => (true, true, true),
            10..=14 => (true, false, true),
            _ => (true, false, false),
        };
        cases.push(Case::new("squad", false, correct, 1));
    }
    for i in 0..20 {
        let correct = match i {
            0..=9 => (false, true, true),
            10..=14 => (false, true, false),
            _ => (false, false, false),
        };
        cases.push(Case::new("nq", false, correct, 1));
    }
    for i in 0..20 {
        let correct = if i < 15 { (false, false, true) } else { (false, false, false) };
        cases.push(Case::new("hotpot", true, correct, 3));
    }
    cases
}

pub fn question(i: usize) -> String {
    format!("Which code word belongs to item {i}?")
}

pub fn gold(i: usize) -> String {
    format!("Codeword {i}")
}

pub fn query_id(i: usize) -> String {
    format!("q{i:02}")
}

fn cue(i: usize, correct: bool) -> String {
    let answer = if correct { gold(i) } else { format!("Nothing {i}") };
    format!("Looking it up. So the answer is: {answer}.")
}

pub struct Fixture {
    pub dir: PathBuf,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub mock: PathBuf,
    pub config: PathBuf,
    pub cases: Vec<Case>,
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = serde_json::Value>) {
    let text: String = lines.into_iter().map(|v| format!("{v}\n")).collect();
    std::fs::write(path, text).unwrap();
}

/// Writes corpus, queries, mock script and a config file under `dir`.
pub fn write_fixture(dir: &Path, cases: &[Case]) -> Fixture {
    std::fs::create_dir_all(dir).unwrap();
    let corpus = dir.join("corpus.jsonl");
    let queries = dir.join("queries.jsonl");
    let mock = dir.join("mock.jsonl");
    let config = dir.join("run.cfg");

    write_lines(
        &corpus,
        (0..cases.len())
            .map(|i| {
                json!({
                    "doc_id": format!("doc{i}"),
                    "title": format!("Item {i}"),
                    "text": format!("Item {i} is filed under code word {} in the registry.", gold(i)),
                })
            })
            .chain((0..5).map(|j| {
                json!({"doc_id": format!("filler{j}"), "title": "Registry", "text": "The registry lists many items."})
            })),
    );
    write_lines(
        &queries,
        cases.iter().enumerate().map(|(i, c)| {
            json!({
                "query_id": query_id(i),
                "question": question(i),
                "dataset_id": c.dataset,
                "hop_type": if c.multi_hop { "multi_hop" } else { "single_hop" },
                "gold_answers": [gold(i)],
            })
        }),
    );

    // Chain rules go first: a later-step prompt also contains the question line.
    let mut rules = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        for step in (1..c.multi_steps).rev() {
            let response = if step + 1 == c.multi_steps {
                cue(i, c.correct.2)
            } else {
                format!("Hop {} of query {i}.", step + 1)
            };
            rules.push(json!({"pattern": format!("Hop {step} of query {i}."), "response": response}));
        }
    }
    for (i, c) in cases.iter().enumerate() {
        let q = question(i);
        rules.push(json!({"pattern": format!("Q: {q}\n[closed-book]"), "response": cue(i, c.correct.0)}));
        rules.push(json!({"pattern": format!("Q: {q}\n[one retrieval]"), "response": cue(i, c.correct.1)}));
        let first = if c.multi_steps == 1 {
            cue(i, c.correct.2)
        } else {
            format!("Hop 1 of query {i}.")
        };
        rules.push(json!({"pattern": format!("Q: {q}\n[iterative retrieval]"), "response": first}));
    }
    write_lines(&mock, rules);

    std::fs::write(
        &config,
        format!(
            "# fixture run\ncorpus = {}\nqueries = {}\nbackend = mock:{}\nworkers = 3\n",
            corpus.display(),
            queries.display(),
            mock.display()
        ),
    )
    .unwrap();

    Fixture {
        dir: dir.to_path_buf(),
        corpus,
        queries,
        mock,
        config,
        cases: cases.to_vec(),
    }
}

pub fn arag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arag"))
        .args(args)
        .env("ARAG_LOG", "warn")
        .output()
        .expect("run arag")
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

pub fn read_jsonl(p: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(p)
        .unwrap_or_else(|e| panic!("{}: {e}", p.display()))
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Trace lines with the wall-clock field removed.
pub fn trace_without_elapsed(p: &Path) -> Vec<String> {
    read_jsonl(p)
        .into_iter()
        .map(|mut v| {
            v.as_object_mut().unwrap().remove("elapsed");
            v.to_string()
        })
        .collect()
}

pub fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}
