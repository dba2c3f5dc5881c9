//! Stem-aware unigram alignment metric (a METEOR variant).
//!
//! Matching runs in two passes: exact surface match first, then Porter-stem
//! match over the still-unmatched tokens. Both passes scan the candidate left
//! to right and take the leftmost unmatched reference token, which makes the
//! alignment deterministic and hand-checkable. No synonym dictionary is
//! consulted.
//!
//! Score = F_mean * (1 - penalty) with F_mean = 10PR / (R + 9P) and
//! penalty = 0.5 * (chunks / matches)^3, where a chunk is a maximal run of
//! matches contiguous in both sequences.

use super::stem::porter_stem;
use super::TokenSequence;

/// Candidate-position -> reference-position alignment.
fn align(candidate: &[String], reference: &[String]) -> Vec<(usize, usize)> {
    let mut cand_matched = vec![false; candidate.len()];
    let mut ref_matched = vec![false; reference.len()];
    let mut pairs = Vec::new();

    // pass 1: exact
    for (i, token) in candidate.iter().enumerate() {
        if let Some(j) = reference
            .iter()
            .enumerate()
            .position(|(j, r)| !ref_matched[j] && r == token)
        {
            cand_matched[i] = true;
            ref_matched[j] = true;
            pairs.push((i, j));
        }
    }

    // pass 2: stems
    let ref_stems: Vec<String> = reference.iter().map(|t| porter_stem(t)).collect();
    for (i, token) in candidate.iter().enumerate() {
        if cand_matched[i] {
            continue;
        }
        let stem = porter_stem(token);
        if let Some(j) = (0..reference.len()).find(|&j| !ref_matched[j] && ref_stems[j] == stem) {
            cand_matched[i] = true;
            ref_matched[j] = true;
            pairs.push((i, j));
        }
    }

    pairs.sort_unstable();
    pairs
}

fn count_chunks(pairs: &[(usize, usize)]) -> usize {
    if pairs.is_empty() {
        return 0;
    }
    let mut chunks = 1;
    for window in pairs.windows(2) {
        let (ci, ri) = window[0];
        let (cj, rj) = window[1];
        if cj != ci + 1 || rj != ri + 1 {
            chunks += 1;
        }
    }
    chunks
}

pub fn meteor_lite(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let pairs = align(candidate.tokens(), reference.tokens());
    let matches = pairs.len();
    if matches == 0 {
        return 0.0;
    }
    let precision = matches as f64 / candidate.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let f_mean = 10.0 * precision * recall / (recall + 9.0 * precision);
    let chunks = count_chunks(&pairs);
    let penalty = 0.5 * (chunks as f64 / matches as f64).powi(3);
    f_mean * (1.0 - penalty)
}
