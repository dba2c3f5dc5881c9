//! Word tokenization shared by all overlap metrics.
//!
//! Rules: split on Unicode whitespace, strip leading/trailing
//! non-alphanumeric characters from each token, lowercase. Tokens that
//! become empty (pure punctuation) are dropped. Interior punctuation is
//! kept, so "don't" and "state-of-the-art" survive as single tokens.

use serde::{Deserialize, Serialize};

/// An ordered list of lowercased word tokens plus the source length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    tokens: Vec<String>,
    source_char_len: usize,
}

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn source_char_len(&self) -> usize {
        self.source_char_len
    }

    /// Build directly from pre-tokenized words (test fixtures, mostly).
    /// Empty strings are rejected to uphold the no-empty-token invariant.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        assert!(
            tokens.iter().all(|t| !t.is_empty()),
            "token sequences must not contain empty tokens"
        );
        let source_char_len = tokens.iter().map(|t| t.chars().count()).sum();
        Self {
            tokens,
            source_char_len,
        }
    }
}

/// Deterministic word tokenizer. Empty input yields an empty sequence.
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .split_whitespace()
        .filter_map(|raw| {
            let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if stripped.is_empty() {
                None
            } else {
                Some(stripped.to_lowercase())
            }
        })
        .collect();
    TokenSequence {
        tokens,
        source_char_len: text.chars().count(),
    }
}
