//! Meta-evaluation: how well do metric scores track human judgments?
//!
//! Loads a human-annotated dataset (documents, system summaries, per-
//! dimension annotations), aggregates annotator scores, and correlates any
//! metric against them with Kendall τ-b, either pooled per summary (micro)
//! or over per-system means (macro).

mod kendall;
mod krippendorff;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::Dimension;
use crate::refine::{Document, SummaryRecord};
use crate::text_metrics::MetricScore;

pub use kendall::{kendall_tau, kendall_tau_permutation};
pub use krippendorff::{krippendorff_alpha, AnnotationCell, DistanceKind};
pub use report::{render_report, significance_stars, ReportFormat};

#[derive(Debug, Error)]
pub enum MetaEvalError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("metric scores missing for annotated summaries: {}", ids.join(", "))]
    MissingScores { ids: Vec<String> },
    #[error("correlation undefined: a variable is constant")]
    UndefinedCorrelation,
    #[error("too few usable points ({n}) for correlation")]
    TooFewPoints { n: usize },
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("insufficient annotations: {0}")]
    InsufficientAnnotations(String),
}

/// One annotator's judgment of one summary on one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanAnnotation {
    pub summary_id: String,
    pub annotator_id: String,
    pub dimension: Dimension,
    pub score: f64,
    pub scale_min: f64,
    pub scale_max: f64,
}

/// A fully cross-referenced meta-evaluation dataset.
#[derive(Debug, Clone)]
pub struct EvalDataset {
    pub name: String,
    pub documents: Vec<Document>,
    pub summaries: Vec<SummaryRecord>,
    pub annotations: Vec<HumanAnnotation>,
    pub dimensions: Vec<Dimension>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationMode {
    Macro,
    Micro,
}

/// Metric-vs-human Kendall τ for one (dataset, metric, dimension, mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub dataset: String,
    pub metric_id: String,
    pub dimension: Dimension,
    pub mode: CorrelationMode,
    pub tau: f64,
    pub p_value: f64,
    pub n: usize,
}

pub(crate) fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, MetaEvalError> {
    let raw = std::fs::read_to_string(path).map_err(|source| MetaEvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| MetaEvalError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Load and cross-reference a dataset. Dangling references and duplicate
/// ids are integrity errors, named by id.
pub fn load_dataset(
    name: &str,
    documents_path: &Path,
    summaries_path: &Path,
    annotations_path: &Path,
) -> Result<EvalDataset, MetaEvalError> {
    let documents: Vec<Document> = read_jsonl(documents_path)?;
    let summaries: Vec<SummaryRecord> = read_jsonl(summaries_path)?;
    let annotations: Vec<HumanAnnotation> = read_jsonl(annotations_path)?;

    let mut doc_ids = BTreeSet::new();
    for doc in &documents {
        if !doc_ids.insert(doc.id.as_str()) {
            return Err(MetaEvalError::Integrity(format!(
                "duplicate document id {:?}",
                doc.id
            )));
        }
    }
    let mut summary_ids = BTreeSet::new();
    for summary in &summaries {
        if !summary_ids.insert(summary.id.as_str()) {
            return Err(MetaEvalError::Integrity(format!(
                "duplicate summary id {:?}",
                summary.id
            )));
        }
        if !doc_ids.contains(summary.doc_id.as_str()) {
            return Err(MetaEvalError::Integrity(format!(
                "summary {:?} references unknown document {:?}",
                summary.id, summary.doc_id
            )));
        }
    }
    for annotation in &annotations {
        if !summary_ids.contains(annotation.summary_id.as_str()) {
            return Err(MetaEvalError::Integrity(format!(
                "annotation references unknown summary {:?}",
                annotation.summary_id
            )));
        }
        if annotation.score < annotation.scale_min || annotation.score > annotation.scale_max {
            return Err(MetaEvalError::Integrity(format!(
                "annotation for summary {:?} has score {} outside [{}, {}]",
                annotation.summary_id,
                annotation.score,
                annotation.scale_min,
                annotation.scale_max
            )));
        }
    }
    let dimensions: Vec<Dimension> = annotations
        .iter()
        .map(|a| a.dimension)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok(EvalDataset {
        name: name.to_string(),
        documents,
        summaries,
        annotations,
        dimensions,
    })
}

/// Mean annotator score. Permutation-invariant over annotators.
pub fn aggregate_human(scores: &[f64]) -> Result<f64, MetaEvalError> {
    if scores.is_empty() {
        return Err(MetaEvalError::InsufficientAnnotations(
            "aggregation requires at least one annotation".into(),
        ));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

impl EvalDataset {
    /// summary_id -> mean human score for one dimension, sorted by id.
    pub fn human_scores(&self, dimension: Dimension) -> BTreeMap<&str, f64> {
        let mut grouped: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for annotation in &self.annotations {
            if annotation.dimension == dimension {
                grouped
                    .entry(annotation.summary_id.as_str())
                    .or_default()
                    .push(annotation.score);
            }
        }
        grouped
            .into_iter()
            .map(|(id, scores)| {
                let mean = aggregate_human(&scores).expect("group is non-empty");
                (id, mean)
            })
            .collect()
    }

    pub fn system_of(&self, summary_id: &str) -> Option<&str> {
        self.summaries
            .iter()
            .find(|s| s.id == summary_id)
            .map(|s| s.system.as_str())
    }
}

/// How correlation p-values are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValueMethod {
    /// Normal approximation with tie-adjusted variance.
    NormalApprox,
    /// Seeded permutation test for samples smaller than `threshold`,
    /// normal approximation otherwise.
    PermutationBelow {
        threshold: usize,
        rounds: usize,
        seed: u64,
    },
}

/// Correlate one metric's scores against aggregated human judgments.
///
/// Micro pools (metric, human) pairs per summary over the whole dataset;
/// macro first averages both per system label and correlates across
/// systems. Metric values must cover every annotated summary; gaps are an
/// error, never silently dropped rows.
pub fn correlate(
    dataset: &EvalDataset,
    metric_scores: &[MetricScore],
    dimension: Dimension,
    mode: CorrelationMode,
) -> Result<CorrelationResult, MetaEvalError> {
    correlate_with(
        dataset,
        metric_scores,
        dimension,
        mode,
        PValueMethod::NormalApprox,
    )
}

/// [`correlate`] with an explicit p-value method.
pub fn correlate_with(
    dataset: &EvalDataset,
    metric_scores: &[MetricScore],
    dimension: Dimension,
    mode: CorrelationMode,
    p_method: PValueMethod,
) -> Result<CorrelationResult, MetaEvalError> {
    let metric_id = match metric_scores.first() {
        Some(first) => first.metric_id.clone(),
        None => {
            return Err(MetaEvalError::TooFewPoints { n: 0 });
        }
    };
    if metric_scores.iter().any(|s| s.metric_id != metric_id) {
        return Err(MetaEvalError::InvalidData(
            "correlate expects scores for exactly one metric".into(),
        ));
    }

    let human = dataset.human_scores(dimension);
    if human.is_empty() {
        return Err(MetaEvalError::TooFewPoints { n: 0 });
    }
    let metric_by_summary: BTreeMap<&str, f64> = metric_scores
        .iter()
        .map(|s| (s.summary_id.as_str(), s.value))
        .collect();

    let missing: Vec<String> = human
        .keys()
        .filter(|id| !metric_by_summary.contains_key(*id))
        .map(|id| id.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(MetaEvalError::MissingScores { ids: missing });
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = match mode {
        CorrelationMode::Micro => human
            .iter()
            .map(|(id, &h)| (metric_by_summary[id], h))
            .unzip(),
        CorrelationMode::Macro => {
            let mut by_system: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for (id, &h) in &human {
                let system = dataset.system_of(id).ok_or_else(|| {
                    MetaEvalError::Integrity(format!("summary {id:?} missing from dataset"))
                })?;
                let entry = by_system.entry(system).or_default();
                entry.0.push(metric_by_summary[id]);
                entry.1.push(h);
            }
            by_system
                .values()
                .map(|(metric, human)| {
                    (
                        metric.iter().sum::<f64>() / metric.len() as f64,
                        human.iter().sum::<f64>() / human.len() as f64,
                    )
                })
                .unzip()
        }
    };

    if xs.len() < 2 {
        return Err(MetaEvalError::TooFewPoints { n: xs.len() });
    }
    let (tau, p_value) = match p_method {
        PValueMethod::PermutationBelow {
            threshold,
            rounds,
            seed,
        } if xs.len() < threshold => kendall_tau_permutation(&xs, &ys, rounds, seed)?,
        _ => kendall_tau(&xs, &ys)?,
    };
    Ok(CorrelationResult {
        dataset: dataset.name.clone(),
        metric_id,
        dimension,
        mode,
        tau,
        p_value,
        n: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text_metrics::Direction;

    fn toy_dataset() -> EvalDataset {
        let documents = vec![Document {
            id: "d1".into(),
            text: "doc".into(),
            domain: None,
        }];
        let mut summaries = Vec::new();
        let mut annotations = Vec::new();
        // four systems, three summaries each would be overkill; one summary
        // per system with distinct human means
        for (i, system) in ["sys_a", "sys_b", "sys_c", "sys_d"].iter().enumerate() {
            let id = format!("s{i}");
            summaries.push(SummaryRecord {
                id: id.clone(),
                doc_id: "d1".into(),
                system: system.to_string(),
                text: "text".into(),
                iteration: 0,
            });
            for annotator in ["h1", "h2"] {
                annotations.push(HumanAnnotation {
                    summary_id: id.clone(),
                    annotator_id: annotator.to_string(),
                    dimension: Dimension::Accuracy,
                    score: (i + 1) as f64,
                    scale_min: 1.0,
                    scale_max: 5.0,
                });
            }
        }
        EvalDataset {
            name: "toy".into(),
            documents,
            summaries,
            annotations,
            dimensions: vec![Dimension::Accuracy],
        }
    }

    fn scores(values: &[(&str, f64)]) -> Vec<MetricScore> {
        values
            .iter()
            .map(|(id, value)| MetricScore {
                metric_id: "m".into(),
                summary_id: id.to_string(),
                value: *value,
                direction: Direction::HigherBetter,
            })
            .collect()
    }

    #[test]
    fn aggregate_human_means() {
        assert_eq!(aggregate_human(&[1.0, 1.0, 0.0]).unwrap(), 2.0 / 3.0);
        assert_eq!(aggregate_human(&[4.0]).unwrap(), 4.0);
        assert_eq!(aggregate_human(&[3.0, 4.0, 5.0]).unwrap(), 4.0);
        assert!(aggregate_human(&[]).is_err());
    }

    #[test]
    fn micro_self_correlation_is_one() {
        let dataset = toy_dataset();
        let metric = scores(&[("s0", 1.0), ("s1", 2.0), ("s2", 3.0), ("s3", 4.0)]);
        let result = correlate(&dataset, &metric, Dimension::Accuracy, CorrelationMode::Micro)
            .unwrap();
        assert_eq!(result.tau, 1.0);
        assert_eq!(result.n, 4);
    }

    #[test]
    fn micro_antitone_is_minus_one() {
        let dataset = toy_dataset();
        let metric = scores(&[("s0", -1.0), ("s1", -2.0), ("s2", -3.0), ("s3", -4.0)]);
        let result = correlate(&dataset, &metric, Dimension::Accuracy, CorrelationMode::Micro)
            .unwrap();
        assert_eq!(result.tau, -1.0);
    }

    #[test]
    fn macro_correlates_system_means() {
        let dataset = toy_dataset();
        let metric = scores(&[("s0", 10.0), ("s1", 20.0), ("s2", 30.0), ("s3", 40.0)]);
        let result = correlate(&dataset, &metric, Dimension::Accuracy, CorrelationMode::Macro)
            .unwrap();
        assert_eq!(result.tau, 1.0);
        assert_eq!(result.n, 4); // four systems
    }

    #[test]
    fn coverage_gap_lists_missing_ids() {
        let dataset = toy_dataset();
        let metric = scores(&[("s0", 1.0), ("s1", 2.0)]);
        match correlate(&dataset, &metric, Dimension::Accuracy, CorrelationMode::Micro) {
            Err(MetaEvalError::MissingScores { ids }) => {
                assert_eq!(ids, vec!["s2".to_string(), "s3".to_string()]);
            }
            other => panic!("expected MissingScores, got {other:?}"),
        }
    }

    #[test]
    fn monotone_transform_leaves_tau_unchanged() {
        let dataset = toy_dataset();
        let raw = scores(&[("s0", 1.0), ("s1", 2.0), ("s2", 3.0), ("s3", 4.0)]);
        let squashed = scores(&[("s0", 0.1), ("s1", 0.11), ("s2", 0.5), ("s3", 0.9)]);
        let a = correlate(&dataset, &raw, Dimension::Accuracy, CorrelationMode::Micro).unwrap();
        let b = correlate(&dataset, &squashed, Dimension::Accuracy, CorrelationMode::Micro)
            .unwrap();
        assert_eq!(a.tau, b.tau);
    }
}
