//! Scripted generator for tests and offline runs.
//!
//! A script is an ordered list of `(pattern, response)` rules. The first rule
//! whose pattern is a substring of the prompt supplies the response; an empty
//! pattern matches every prompt and so acts as a default.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::backend::{GenerationRequest, GeneratorBackend, LlmError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    pub pattern: String,
    pub response: String,
}

#[derive(Debug, thiserror::Error)]
pub enum MockScriptError {
    #[error("failed to read mock script: {0}")]
    Io(#[from] std::io::Error),
    #[error("mock script line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Default)]
pub struct ScriptedMock {
    rules: Vec<MockRule>,
    calls: AtomicUsize,
}

impl ScriptedMock {
    pub fn new(rules: Vec<MockRule>) -> Self {
        Self {
            rules,
            calls: AtomicUsize::new(0),
        }
    }

    /// Appends a catch-all rule.
    pub fn with_default(mut self, response: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            pattern: String::new(),
            response: response.into(),
        });
        self
    }

    pub fn rule(mut self, pattern: impl Into<String>, response: impl Into<String>) -> Self {
        self.rules.push(MockRule {
            pattern: pattern.into(),
            response: response.into(),
        });
        self
    }

    /// Reads a JSONL script of `{pattern, response}` objects.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, MockScriptError> {
        let reader = BufReader::new(File::open(path)?);
        let mut rules = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: MockRule =
                serde_json::from_str(&line).map_err(|e| MockScriptError::Malformed {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            rules.push(rule);
        }
        Ok(Self::new(rules))
    }

    pub fn rules(&self) -> &[MockRule] {
        &self.rules
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl GeneratorBackend for ScriptedMock {
    fn backend_id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.rules
            .iter()
            .find(|r| request.prompt.contains(&r.pattern))
            .map(|r| r.response.clone())
            .ok_or_else(|| LlmError::NoMockMatch {
                prompt_head: request.prompt.chars().take(80).collect(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::generate;
    use std::io::Write;

    #[test]
    fn first_matching_rule_wins() {
        let mock = ScriptedMock::default()
            .rule("capital", "So the answer is: Paris.")
            .rule("cap", "unused")
            .with_default("I don't know.");
        let resp = generate(&mock, &GenerationRequest::new("What is the capital?")).unwrap();
        assert_eq!(resp.text, "So the answer is: Paris.");
        let resp = generate(&mock, &GenerationRequest::new("Something else")).unwrap();
        assert_eq!(resp.text, "I don't know.");
        assert_eq!(mock.calls(), 2);
    }

    #[test]
    fn unmatched_without_default_errors() {
        let mock = ScriptedMock::default().rule("x", "y");
        assert!(matches!(
            generate(&mock, &GenerationRequest::new("abc")),
            Err(LlmError::NoMockMatch { .. })
        ));
    }

    #[test]
    fn identical_requests_identical_text() {
        let mock = ScriptedMock::default().with_default("fixed");
        let req = GenerationRequest::new("p");
        let a = generate(&mock, &req).unwrap();
        let b = generate(&mock, &req).unwrap();
        assert_eq!((a.text, a.backend_id), (b.text, b.backend_id));
    }

    #[test]
    fn loads_script_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, r#"{{"pattern":"Q: a\n[closed-book]","response":"So the answer is: A."}}"#).unwrap();
        writeln!(f).unwrap();
        writeln!(f, r#"{{"pattern":"","response":"fallback"}}"#).unwrap();
        let mock = ScriptedMock::load(f.path()).unwrap();
        assert_eq!(mock.rules().len(), 2);
        assert_eq!(mock.rules()[0].pattern, "Q: a\n[closed-book]");

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, r#"{{"pattern":"x"}}"#).unwrap();
        assert!(matches!(
            ScriptedMock::load(bad.path()),
            Err(MockScriptError::Malformed { line: 1, .. })
        ));
    }
}
