//! Hashed n-gram features for question text.

use std::hash::Hasher;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};

use crate::retriever::tokenize;

/// Upper bounds (inclusive, in tokens) of the question-length buckets; longer
/// questions fall in one final bucket.
const LENGTH_BUCKETS: [usize; 6] = [0, 4, 8, 12, 16, 24];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeaturizerConfig {
    pub dim: u32,
    /// Word n-gram orders to extract, e.g. `[1, 2]`.
    pub ngram_orders: Vec<u8>,
}

impl Default for FeaturizerConfig {
    fn default() -> Self {
        Self {
            dim: 1 << 18,
            ngram_orders: vec![1, 2],
        }
    }
}

impl FeaturizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.dim == 0 {
            return Err("feature dimension must be positive".into());
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err("n-gram orders must be a non-empty list of positive integers".into());
        }
        if self.ngram_orders.len() > 8 {
            return Err("at most 8 n-gram orders are supported".into());
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u32(self.dim);
        h.write(&self.ngram_orders);
        h.finish()
    }
}

/// Sparse non-negative counts, sorted by index with no repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub dim: u32,
    pub config_fingerprint: u64,
    pub entries: Vec<(u32, f64)>,
}

impl FeatureVector {
    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }
}

pub fn feature_index(key: &str, dim: u32) -> u32 {
    let mut h = FnvHasher::default();
    h.write(key.as_bytes());
    (h.finish() % u64::from(dim)) as u32
}

pub fn length_bucket(tokens: usize) -> usize {
    LENGTH_BUCKETS
        .iter()
        .position(|&upper| tokens <= upper)
        .unwrap_or(LENGTH_BUCKETS.len())
}

/// Feature keys before hashing: `"{n}:{gram}"` for each configured n-gram
/// order and `"len:{bucket}"` for the question length.
pub fn feature_keys(question: &str, config: &FeaturizerConfig) -> Vec<String> {
    let tokens = tokenize(question);
    let mut keys = Vec::new();
    for &n in &config.ngram_orders {
        let n = usize::from(n);
        if tokens.len() < n {
            continue;
        }
        for gram in tokens.windows(n) {
            keys.push(format!("{n}:{}", gram.join(" ")));
        }
    }
    keys.push(format!("len:{}", length_bucket(tokens.len())));
    keys
}

pub fn featurize(question: &str, config: &FeaturizerConfig) -> FeatureVector {
    let mut indices: Vec<u32> = feature_keys(question, config)
        .iter()
        .map(|k| feature_index(k, config.dim))
        .collect();
    indices.sort_unstable();
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(indices.len());
    for i in indices {
        match entries.last_mut() {
            Some((last, count)) if *last == i => *count += 1.0,
            _ => entries.push((i, 1.0)),
        }
    }
    FeatureVector {
        dim: config.dim,
        config_fingerprint: config.fingerprint(),
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn empty_question_has_only_length_feature() {
        let cfg = FeaturizerConfig::default();
        let fv = featurize("", &cfg);
        assert_eq!(fv.entries, [(feature_index("len:0", cfg.dim), 1.0)]);
    }

    #[test]
    fn deterministic() {
        let cfg = FeaturizerConfig::default();
        let q = "Who was the son of the navigator?";
        assert_eq!(featurize(q, &cfg), featurize(q, &cfg));
        assert_eq!(cfg.fingerprint(), FeaturizerConfig::default().fingerprint());
    }

    #[test]
    fn counts_repeated_grams() {
        let cfg = FeaturizerConfig { dim: 1 << 20, ngram_orders: vec![1] };
        let fv = featurize("spam spam eggs", &cfg);
        let spam = feature_index("1:spam", cfg.dim);
        assert!(fv.entries.contains(&(spam, 2.0)));
        assert_eq!(fv.entries.iter().map(|e| e.1).sum::<f64>(), 4.0);
        assert!(fv.entries.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn one_word_change_touches_only_its_grams() {
        let cfg = FeaturizerConfig { dim: 1 << 20, ngram_orders: vec![1, 2] };
        let a = "who founded the city of philipsburg";
        let b = "who founded the town of philipsburg";
        // Hand-enumerated grams that mention the swapped word.
        let only_a = ["1:city", "2:the city", "2:city of"];
        let only_b = ["1:town", "2:the town", "2:town of"];

        let all_keys: BTreeSet<String> = feature_keys(a, &cfg)
            .into_iter()
            .chain(feature_keys(b, &cfg))
            .collect();
        let all_idx: BTreeSet<u32> = all_keys.iter().map(|k| feature_index(k, cfg.dim)).collect();
        assert_eq!(all_idx.len(), all_keys.len(), "fixture must be collision-free");

        let ia: BTreeSet<u32> = featurize(a, &cfg).indices().collect();
        let ib: BTreeSet<u32> = featurize(b, &cfg).indices().collect();
        let diff: BTreeSet<u32> = ia.symmetric_difference(&ib).copied().collect();
        let expected: BTreeSet<u32> = only_a
            .iter()
            .chain(&only_b)
            .map(|k| feature_index(k, cfg.dim))
            .collect();
        assert_eq!(diff, expected);
    }

    #[test]
    fn length_buckets() {
        assert_eq!(length_bucket(0), 0);
        assert_eq!(length_bucket(1), 1);
        assert_eq!(length_bucket(4), 1);
        assert_eq!(length_bucket(5), 2);
        assert_eq!(length_bucket(24), 5);
        assert_eq!(length_bucket(25), 6);
    }

    #[test]
    fn indices_within_dim() {
        let cfg = FeaturizerConfig { dim: 7, ngram_orders: vec![1, 2, 3] };
        let fv = featurize("a b c d e f g h i j k", &cfg);
        assert!(fv.indices().all(|i| i < 7));
        assert!(fv.entries.iter().all(|e| e.1 > 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(FeaturizerConfig::default().validate().is_ok());
        assert!(FeaturizerConfig { dim: 0, ngram_orders: vec![1] }.validate().is_err());
        assert!(FeaturizerConfig { dim: 8, ngram_orders: vec![] }.validate().is_err());
        assert!(FeaturizerConfig { dim: 8, ngram_orders: vec![0] }.validate().is_err());
    }
}
