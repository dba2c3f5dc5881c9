//! Native reference-free text metrics and the metric score catalog.
//!
//! All metric functions are pure: equal inputs give bit-identical results,
//! and calls are safe from any number of threads.

mod external;
mod meteor;
mod overlap;
mod readability;
mod stem;
mod tokenize;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::ingest_external_scores;
pub use meteor::meteor_lite;
pub use overlap::{
    bleu, chrf, rouge_l, rouge_n, OverlapScore, BLEU_DEFAULT_MAX_N, CHRF_DEFAULT_BETA,
    CHRF_DEFAULT_MAX_N,
};
pub use readability::{
    count_sentences, count_syllables, dale_chall, flesch_reading_ease, readability, DaleChallList,
    Readability,
};
pub use stem::porter_stem;
pub use tokenize::{tokenize, TokenSequence};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("missing asset {path}: {source}")]
    MissingAsset {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate score for metric {metric_id:?} and summary {summary_id:?}")]
    Conflict {
        metric_id: String,
        summary_id: String,
    },
}

/// Whether larger values of a metric indicate better summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// One scalar metric value for one summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric_id: String,
    pub summary_id: String,
    pub value: f64,
    pub direction: Direction,
}

/// Which scalar a ROUGE triple exports to the meta-evaluation harness.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeScalar {
    #[default]
    Recall,
    F1,
}

const BUILTIN_METRICS: &[(&str, Direction)] = &[
    ("rouge_1", Direction::HigherBetter),
    ("rouge_2", Direction::HigherBetter),
    ("rouge_l", Direction::HigherBetter),
    ("bleu", Direction::HigherBetter),
    ("chrf", Direction::HigherBetter),
    ("meteor", Direction::HigherBetter),
    ("fre", Direction::HigherBetter),
    ("dcr", Direction::LowerBetter),
];

/// Registry of known metric ids and their directions. External ids are
/// added on ingestion.
#[derive(Debug, Clone, Default)]
pub struct MetricCatalog {
    pub(crate) registered: BTreeMap<String, Direction>,
}

impl MetricCatalog {
    pub fn new() -> Self {
        let registered = BUILTIN_METRICS
            .iter()
            .map(|(id, d)| (id.to_string(), *d))
            .collect();
        Self { registered }
    }

    pub fn direction(&self, metric_id: &str) -> Option<Direction> {
        self.registered.get(metric_id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.registered.keys().map(String::as_str)
    }
}

/// Compute the full built-in metric suite for one candidate/reference pair.
///
/// `reference` is the source document in the default reference-free
/// orientation, or a gold summary when gold-reference mode is selected.
pub fn score_pair(
    candidate: &str,
    reference: &str,
    rouge_scalar: RougeScalar,
    familiar: &DaleChallList,
) -> Result<Vec<(String, f64)>, MetricsError> {
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let pick = |s: OverlapScore| match rouge_scalar {
        RougeScalar::Recall => s.recall,
        RougeScalar::F1 => s.f1,
    };
    let r = readability(candidate, familiar)?;
    Ok(vec![
        ("rouge_1".into(), pick(rouge_n(&cand, &refr, 1)?)),
        ("rouge_2".into(), pick(rouge_n(&cand, &refr, 2)?)),
        ("rouge_l".into(), pick(rouge_l(&cand, &refr))),
        ("bleu".into(), bleu(&cand, &refr, BLEU_DEFAULT_MAX_N)?),
        (
            "chrf".into(),
            chrf(candidate, reference, CHRF_DEFAULT_MAX_N, CHRF_DEFAULT_BETA)?,
        ),
        ("meteor".into(), meteor_lite(&cand, &refr)),
        ("fre".into(), r.flesch_reading_ease),
        ("dcr".into(), r.dale_chall),
    ])
}
