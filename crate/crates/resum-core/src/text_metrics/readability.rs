//! Flesch Reading Ease and Dale-Chall readability.
//!
//! Sentence splitting: '.', '!' or '?' followed by whitespace or end of
//! text ends a sentence; a text with words but no terminator counts as one
//! sentence. Syllables: maximal vowel groups (a, e, i, o, u, y), minus one
//! for a terminal silent 'e' (unless the word ends in "le"), floored at 1.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readability {
    pub flesch_reading_ease: f64,
    pub dale_chall: f64,
}

/// The familiar-word list backing the Dale-Chall score.
///
/// Loaded from a plain-text asset, one word per line. A missing asset is a
/// configuration error; the score never silently degrades to "everything is
/// difficult".
#[derive(Debug, Clone)]
pub struct DaleChallList {
    words: HashSet<String>,
}

impl DaleChallList {
    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let raw = std::fs::read_to_string(path).map_err(|source| MetricsError::MissingAsset {
            path: path.display().to_string(),
            source,
        })?;
        let words = raw
            .lines()
            .map(|line| line.trim().to_lowercase())
            .filter(|line| !line.is_empty())
            .collect();
        Ok(Self { words })
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            words: words.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Numerals count as familiar; everything else must be on the list.
    pub fn is_familiar(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        if w.chars().all(|c| c.is_ascii_digit()) {
            return true;
        }
        self.words.contains(&w)
    }
}

fn split_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if stripped.is_empty() {
                None
            } else {
                Some(stripped.to_lowercase())
            }
        })
        .collect()
}

pub fn count_sentences(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = 0;
    let mut saw_content = false;
    for (i, &c) in chars.iter().enumerate() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.get(i + 1).is_none_or(|next| next.is_whitespace());
            if at_boundary && saw_content {
                sentences += 1;
                saw_content = false;
            }
        } else if !c.is_whitespace() {
            saw_content = true;
        }
    }
    if saw_content {
        sentences += 1;
    }
    sentences.max(1)
}

pub fn count_syllables(word: &str) -> usize {
    let chars: Vec<char> = word.to_lowercase().chars().collect();
    let is_vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups: usize = 0;
    let mut in_group = false;
    for &c in &chars {
        if is_vowel(c) {
            if !in_group {
                groups += 1;
                in_group = true;
            }
        } else {
            in_group = false;
        }
    }
    // terminal silent e: "cake" -> 1, but "table" keeps its final syllable
    let n = chars.len();
    if n >= 2 && chars[n - 1] == 'e' && !is_vowel(chars[n - 2]) && !(chars[n - 2] == 'l') {
        groups = groups.saturating_sub(1);
    }
    groups.max(1)
}

/// FRE = 206.835 - 1.015 * (words/sentences) - 84.6 * (syllables/words).
pub fn flesch_reading_ease(text: &str) -> Result<f64, MetricsError> {
    let words = split_words(text);
    if words.is_empty() {
        return Err(MetricsError::EmptyInput(
            "readability requires at least one word".into(),
        ));
    }
    let sentences = count_sentences(text) as f64;
    let word_count = words.len() as f64;
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();
    Ok(206.835 - 1.015 * (word_count / sentences) - 84.6 * (syllables as f64 / word_count))
}

/// DCR = 0.1579 * pct_difficult + 0.0496 * (words/sentences), plus 3.6365
/// when more than 5% of words are unfamiliar.
pub fn dale_chall(text: &str, familiar: &DaleChallList) -> Result<f64, MetricsError> {
    let words = split_words(text);
    if words.is_empty() {
        return Err(MetricsError::EmptyInput(
            "readability requires at least one word".into(),
        ));
    }
    let sentences = count_sentences(text) as f64;
    let word_count = words.len() as f64;
    let difficult = words.iter().filter(|w| !familiar.is_familiar(w)).count() as f64;
    let pct_difficult = 100.0 * difficult / word_count;
    let mut score = 0.1579 * pct_difficult + 0.0496 * (word_count / sentences);
    if pct_difficult > 5.0 {
        score += 3.6365;
    }
    Ok(score)
}

pub fn readability(text: &str, familiar: &DaleChallList) -> Result<Readability, MetricsError> {
    Ok(Readability {
        flesch_reading_ease: flesch_reading_ease(text)?,
        dale_chall: dale_chall(text, familiar)?,
    })
}
