use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

/// Optional term transforms. Both are off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub stem: bool,
    pub remove_stopwords: bool,
}

// Short English function-word list; only consulted when `remove_stopwords` is set.
const STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "are", "as", "at", "be", "by", "did", "do", "does", "for", "from",
    "had", "has", "have", "he", "her", "his", "how", "in", "is", "it", "its", "of", "on", "or",
    "she", "that", "the", "their", "they", "this", "to", "was", "were", "what", "when", "where",
    "which", "who", "whom", "why", "with",
];

/// Splits on non-alphanumeric boundaries and lowercases.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(|t| {
            // Some lowercase mappings emit combining marks; drop them so the
            // output is a fixed point of tokenize.
            t.chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_alphanumeric())
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// `tokenize` followed by the transforms enabled in `config`.
pub fn tokenize_with(text: &str, config: TokenizerConfig) -> Vec<String> {
    let mut terms = tokenize(text);
    if config.remove_stopwords {
        terms.retain(|t| STOPWORDS.binary_search(&t.as_str()).is_err());
    }
    if config.stem {
        let stemmer = Stemmer::create(Algorithm::English);
        for t in &mut terms {
            let stemmed = stemmer.stem(t);
            if stemmed != t.as_str() {
                *t = stemmed.into_owned();
            }
        }
    }
    terms
}
