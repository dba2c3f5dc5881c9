//! N-gram and subsequence overlap metrics: ROUGE-N, ROUGE-L, BLEU, chrF.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{MetricsError, TokenSequence};

/// Precision/recall/F1 triple, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl OverlapScore {
    fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

fn clipped_matches(
    candidate: &HashMap<&[String], usize>,
    reference: &HashMap<&[String], usize>,
) -> usize {
    candidate
        .iter()
        .map(|(gram, count)| reference.get(gram).map_or(0, |r| (*count).min(*r)))
        .sum()
}

/// ROUGE-N with clipped multiset matching. A side with fewer than `n`
/// tokens contributes zero n-grams and its ratio is 0.
pub fn rouge_n(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    n: usize,
) -> Result<OverlapScore, MetricsError> {
    if n == 0 {
        return Err(MetricsError::InvalidParameter(
            "rouge_n requires n >= 1".into(),
        ));
    }
    let cand = ngram_counts(candidate.tokens(), n);
    let refr = ngram_counts(reference.tokens(), n);
    let cand_total: usize = cand.values().sum();
    let ref_total: usize = refr.values().sum();
    let matched = clipped_matches(&cand, &refr);

    let precision = if cand_total == 0 {
        0.0
    } else {
        matched as f64 / cand_total as f64
    };
    let recall = if ref_total == 0 {
        0.0
    } else {
        matched as f64 / ref_total as f64
    };
    Ok(OverlapScore::from_pr(precision, recall))
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // Two-row DP keeps this O(min) in memory.
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for ai in a {
        for (j, bj) in b.iter().enumerate() {
            curr[j + 1] = if ai == bj {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// ROUGE-L: longest common subsequence, P = L/|candidate|, R = L/|reference|.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> OverlapScore {
    let lcs = lcs_length(candidate.tokens(), reference.tokens());
    let precision = if candidate.is_empty() {
        0.0
    } else {
        lcs as f64 / candidate.len() as f64
    };
    let recall = if reference.is_empty() {
        0.0
    } else {
        lcs as f64 / reference.len() as f64
    };
    OverlapScore::from_pr(precision, recall)
}

pub const BLEU_DEFAULT_MAX_N: usize = 4;

/// Sentence BLEU: geometric mean of modified n-gram precisions for
/// n = 1..=max_n with brevity penalty exp(1 - |ref|/|cand|) for short
/// candidates.
///
/// Smoothing: for n >= 2 with zero matches, precision is
/// (m + 0.1) / (t + 0.1). Orders the candidate is too short to produce
/// (t = 0) therefore contribute a factor of 1, which keeps
/// bleu(s, s) == 1 for any non-empty s.
pub fn bleu(
    candidate: &TokenSequence,
    reference: &TokenSequence,
    max_n: usize,
) -> Result<f64, MetricsError> {
    if max_n == 0 {
        return Err(MetricsError::InvalidParameter(
            "bleu requires max_n >= 1".into(),
        ));
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate.tokens(), n);
        let refr = ngram_counts(reference.tokens(), n);
        let total: usize = cand.values().sum();
        let matched = clipped_matches(&cand, &refr);
        let p = if matched > 0 {
            matched as f64 / total as f64
        } else if n >= 2 {
            (matched as f64 + 0.1) / (total as f64 + 0.1)
        } else {
            return Ok(0.0); // no unigram overlap at all
        };
        log_sum += p.ln();
    }
    let geo_mean = (log_sum / max_n as f64).exp();

    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    Ok(geo_mean * brevity)
}

pub const CHRF_DEFAULT_MAX_N: usize = 6;
pub const CHRF_DEFAULT_BETA: f64 = 2.0;

fn char_ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut counts: HashMap<&[char], usize> = HashMap::new();
    if n == 0 || chars.len() < n {
        return counts;
    }
    for gram in chars.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// chrF: character n-gram F-beta averaged over orders 1..=max_char_n,
/// with whitespace removed before extraction. Orders where neither side
/// has any n-gram are skipped so that identical strings score exactly 1.
pub fn chrf(
    candidate: &str,
    reference: &str,
    max_char_n: usize,
    beta: f64,
) -> Result<f64, MetricsError> {
    if max_char_n == 0 {
        return Err(MetricsError::InvalidParameter(
            "chrf requires max_char_n >= 1".into(),
        ));
    }
    let cand: Vec<char> = candidate.chars().filter(|c| !c.is_whitespace()).collect();
    let refr: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    if cand.is_empty() && refr.is_empty() {
        return Ok(1.0);
    }
    if cand.is_empty() || refr.is_empty() {
        return Ok(0.0);
    }

    let beta_sq = beta * beta;
    let mut sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_char_n {
        let cand_grams = char_ngram_counts(&cand, n);
        let ref_grams = char_ngram_counts(&refr, n);
        let cand_total: usize = cand_grams.values().sum();
        let ref_total: usize = ref_grams.values().sum();
        if cand_total == 0 && ref_total == 0 {
            continue;
        }
        orders += 1;
        let matched: usize = cand_grams
            .iter()
            .map(|(gram, count)| ref_grams.get(gram).map_or(0, |r| (*count).min(*r)))
            .sum();
        let p = if cand_total == 0 {
            0.0
        } else {
            matched as f64 / cand_total as f64
        };
        let r = if ref_total == 0 {
            0.0
        } else {
            matched as f64 / ref_total as f64
        };
        if beta_sq * p + r > 0.0 {
            sum += (1.0 + beta_sq) * p * r / (beta_sq * p + r);
        }
    }
    Ok(sum / orders as f64)
}
