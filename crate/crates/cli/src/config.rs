//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! taken relative to the working directory. Values given on the command line
//! replace values from the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use arag_core::labeler::{GatingMetric, LabelingMode};
use arag_core::strategies::{DocumentWindow, RetrievalQueryMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    NoRetrieval,
    Single,
    Multi,
    Adaptive,
    Oracle,
}

impl EvalMode {
    pub const ALL: [EvalMode; 5] = [
        EvalMode::NoRetrieval,
        EvalMode::Single,
        EvalMode::Multi,
        EvalMode::Adaptive,
        EvalMode::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EvalMode::NoRetrieval => "no_retrieval",
            EvalMode::Single => "single",
            EvalMode::Multi => "multi",
            EvalMode::Adaptive => "adaptive",
            EvalMode::Oracle => "oracle",
        }
    }
}

impl FromStr for EvalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EvalMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EvalMode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode {s:?} (expected one of: {})", names.join(", "))
            })
    }
}

impl std::fmt::Display for EvalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where generations come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    /// Scripted mock rules from a JSONL file.
    Mock(PathBuf),
    /// OpenAI-compatible completions endpoint configured by the `remote_*` keys.
    Remote,
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some(("mock", path)) if !path.is_empty() => Ok(BackendSpec::Mock(PathBuf::from(path))),
            _ if s == "remote" => Ok(BackendSpec::Remote),
            _ => Err(format!("backend must be \"remote\" or \"mock:<script.jsonl>\", got {s:?}")),
        }
    }
}

impl std::fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendSpec::Mock(p) => write!(f, "mock:{}", p.display()),
            BackendSpec::Remote => f.write_str("remote"),
        }
    }
}

/// Queries drawn per dataset for outcome labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSize {
    All,
    Count(usize),
}

impl FromStr for SampleSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(SampleSize::All);
        }
        s.parse()
            .map(SampleSize::Count)
            .map_err(|_| format!("expected a count or \"all\", got {s:?}"))
    }
}

impl std::fmt::Display for SampleSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SampleSize::All => f.write_str("all"),
            SampleSize::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    /// Index snapshot; `index` writes it, other commands read it when set.
    pub index: Option<PathBuf>,
    pub backend: Option<BackendSpec>,
    pub templates: Option<PathBuf>,
    pub remote_base_url: String,
    pub remote_model: String,
    pub api_key_env: String,
    pub timeout_secs: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,

    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub stem: bool,
    pub stopwords: bool,

    pub k: usize,
    pub max_steps: usize,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub query_mode: RetrievalQueryMode,
    pub document_window: DocumentWindow,

    pub seed: u64,
    pub labeling_mode: LabelingMode,
    pub gating_metric: GatingMetric,
    pub sample_per_dataset: SampleSize,
    pub bias_sample: usize,
    pub triples: Option<PathBuf>,
    pub training_set: Option<PathBuf>,
    pub exclude_ids: Option<PathBuf>,

    pub classifier: Option<PathBuf>,
    pub epochs: u64,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    pub feature_dim: u32,
    pub ngram_orders: Vec<u8>,

    pub mode: Option<EvalMode>,
    pub baseline_trace: Option<PathBuf>,
    pub workers: usize,
    pub max_failure_fraction: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let strategy = arag_core::strategies::StrategyConfig::default();
        let bm25 = arag_core::retriever::Bm25Params::default();
        let train = arag_core::classifier::TrainConfig::default();
        let features = arag_core::classifier::FeaturizerConfig::default();
        Self {
            corpus: None,
            queries: None,
            index: None,
            backend: None,
            templates: None,
            remote_base_url: "http://127.0.0.1:8000/v1".into(),
            remote_model: "default".into(),
            api_key_env: "ARAG_API_KEY".into(),
            timeout_secs: 60.0,
            max_retries: 3,
            max_in_flight: 4,
            bm25_k1: bm25.k1,
            bm25_b: bm25.b,
            stem: false,
            stopwords: false,
            k: strategy.k,
            max_steps: strategy.max_steps,
            max_new_tokens: strategy.max_new_tokens,
            temperature: strategy.temperature,
            query_mode: strategy.query_mode,
            document_window: strategy.document_window,
            seed: 0,
            labeling_mode: LabelingMode::Full,
            gating_metric: GatingMetric::Em,
            sample_per_dataset: SampleSize::Count(400),
            bias_sample: 0,
            triples: None,
            training_set: None,
            exclude_ids: None,
            classifier: None,
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            holdout_fraction: train.holdout_fraction,
            feature_dim: features.dim,
            ngram_orders: features.ngram_orders,
            mode: None,
            baseline_trace: None,
            workers: 4,
            max_failure_fraction: 0.1,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("{key}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, value: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| format!("{key}: unsupported value {value:?}"))
}

fn enum_name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn path_opt(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key. Unknown keys and malformed values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let path = || Some(PathBuf::from(value));
        match key {
            "corpus" => self.corpus = path(),
            "queries" => self.queries = path(),
            "index" => self.index = path(),
            "backend" => self.backend = Some(parse(key, value)?),
            "templates" => self.templates = path(),
            "remote_base_url" => self.remote_base_url = value.to_string(),
            "remote_model" => self.remote_model = value.to_string(),
            "api_key_env" => self.api_key_env = value.to_string(),
            "timeout_secs" => self.timeout_secs = parse(key, value)?,
            "max_retries" => self.max_retries = parse(key, value)?,
            "max_in_flight" => self.max_in_flight = parse(key, value)?,
            "bm25_k1" => self.bm25_k1 = parse(key, value)?,
            "bm25_b" => self.bm25_b = parse(key, value)?,
            "stem" => self.stem = parse_bool(key, value)?,
            "stopwords" => self.stopwords = parse_bool(key, value)?,
            "k" => self.k = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "max_new_tokens" => self.max_new_tokens = parse(key, value)?,
            "temperature" => self.temperature = parse(key, value)?,
            "query_mode" => self.query_mode = parse_enum(key, value)?,
            "document_window" => self.document_window = parse_enum(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "labeling_mode" => self.labeling_mode = parse(key, value)?,
            "gating_metric" => self.gating_metric = parse(key, value)?,
            "sample_per_dataset" => self.sample_per_dataset = parse(key, value)?,
            "bias_sample" => self.bias_sample = parse(key, value)?,
            "triples" => self.triples = path(),
            "training_set" => self.training_set = path(),
            "exclude_ids" => self.exclude_ids = path(),
            "classifier" => self.classifier = path(),
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "holdout_fraction" => self.holdout_fraction = parse(key, value)?,
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "ngram_orders" => {
                self.ngram_orders = value
                    .split(',')
                    .map(|s| parse::<u8>(key, s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "mode" => self.mode = Some(parse(key, value)?),
            "baseline_trace" => self.baseline_trace = path(),
            "workers" => self.workers = parse(key, value)?,
            "max_failure_fraction" => self.max_failure_fraction = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_str(&mut self, text: &str, origin: &str) -> Result<(), String> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("{origin}:{}: expected key = value", i + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("{origin}:{}: {e}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
        self.apply_str(&text, &path.display().to_string())
    }

    /// Checks value ranges that do not depend on the command.
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if self.max_steps == 0 {
            return Err("max_steps must be at least 1".into());
        }
        if self.workers == 0 {
            return Err("workers must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.max_failure_fraction) {
            return Err("max_failure_fraction must be in [0, 1]".into());
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err("timeout_secs must be positive".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    /// Every effective setting as strings, for report files.
    pub fn snapshot(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("corpus", path_opt(&self.corpus));
        put("queries", path_opt(&self.queries));
        put("index", path_opt(&self.index));
        put("backend", self.backend.as_ref().map(|b| b.to_string()).unwrap_or_default());
        put("templates", path_opt(&self.templates));
        put("remote_base_url", self.remote_base_url.clone());
        put("remote_model", self.remote_model.clone());
        put("api_key_env", self.api_key_env.clone());
        put("timeout_secs", self.timeout_secs.to_string());
        put("max_retries", self.max_retries.to_string());
        put("max_in_flight", self.max_in_flight.to_string());
        put("bm25_k1", self.bm25_k1.to_string());
        put("bm25_b", self.bm25_b.to_string());
        put("stem", self.stem.to_string());
        put("stopwords", self.stopwords.to_string());
        put("k", self.k.to_string());
        put("max_steps", self.max_steps.to_string());
        put("max_new_tokens", self.max_new_tokens.to_string());
        put("temperature", self.temperature.to_string());
        put("query_mode", enum_name(&self.query_mode));
        put("document_window", enum_name(&self.document_window));
        put("seed", self.seed.to_string());
        put("labeling_mode", self.labeling_mode.to_string());
        put("gating_metric", self.gating_metric.to_string());
        put("sample_per_dataset", self.sample_per_dataset.to_string());
        put("bias_sample", self.bias_sample.to_string());
        put("triples", path_opt(&self.triples));
        put("training_set", path_opt(&self.training_set));
        put("exclude_ids", path_opt(&self.exclude_ids));
        put("classifier", path_opt(&self.classifier));
        put("epochs", self.epochs.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("holdout_fraction", self.holdout_fraction.to_string());
        put("feature_dim", self.feature_dim.to_string());
        put(
            "ngram_orders",
            self.ngram_orders.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","),
        );
        put("mode", self.mode.map(|m| m.to_string()).unwrap_or_default());
        put("baseline_trace", path_opt(&self.baseline_trace));
        put("workers", self.workers.to_string());
        put("max_failure_fraction", self.max_failure_fraction.to_string());
        put("out", self.out.display().to_string());
        m
    }

    pub fn index_path(&self) -> PathBuf {
        self.index.clone().unwrap_or_else(|| self.out.join("index.bin"))
    }

    pub fn classifier_path(&self) -> PathBuf {
        self.classifier.clone().unwrap_or_else(|| self.out.join("classifier.bin"))
    }

    pub fn training_set_path(&self) -> PathBuf {
        self.training_set.clone().unwrap_or_else(|| self.out.join("training_set.jsonl"))
    }

    pub fn triples_path(&self) -> PathBuf {
        self.triples.clone().unwrap_or_else(|| self.out.join("triples.jsonl"))
    }
}
