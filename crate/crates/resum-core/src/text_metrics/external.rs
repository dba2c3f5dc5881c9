//! Ingestion of precomputed scores from external scorers (neural metrics
//! such as BERTScore or SummaC run elsewhere).
//!
//! Two file shapes are accepted and auto-detected:
//! - line-delimited records: `{"summary_id": "s1", "metric": "summac_cv", "value": 0.41}`
//! - comma-delimited tables with columns summary_id,metric,value and an
//!   optional header row.

use std::collections::HashSet;
use std::path::Path;

use super::{Direction, MetricCatalog, MetricScore, MetricsError};

#[derive(serde::Deserialize)]
struct ExternalRow {
    summary_id: String,
    metric: String,
    value: f64,
}

fn push_row(
    row: ExternalRow,
    catalog: &mut MetricCatalog,
    seen: &mut HashSet<(String, String)>,
    out: &mut Vec<MetricScore>,
) -> Result<(), MetricsError> {
    if !seen.insert((row.metric.clone(), row.summary_id.clone())) {
        return Err(MetricsError::Conflict {
            metric_id: row.metric,
            summary_id: row.summary_id,
        });
    }
    let direction = catalog.register_external(&row.metric);
    out.push(MetricScore {
        metric_id: row.metric,
        summary_id: row.summary_id,
        value: row.value,
        direction,
    });
    Ok(())
}

pub fn ingest_external_scores(
    path: &Path,
    catalog: &mut MetricCatalog,
) -> Result<Vec<MetricScore>, MetricsError> {
    let raw = std::fs::read_to_string(path).map_err(|source| MetricsError::MissingAsset {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();

    let looks_like_json = raw
        .lines()
        .find(|l| !l.trim().is_empty())
        .is_some_and(|l| l.trim_start().starts_with('{'));

    if looks_like_json {
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: ExternalRow =
                serde_json::from_str(line).map_err(|e| MetricsError::Parse {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            push_row(row, catalog, &mut seen, &mut out)?;
        }
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .from_reader(raw.as_bytes());
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| MetricsError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            if idx == 0 && record.get(2).is_some_and(|v| v.parse::<f64>().is_err()) {
                continue; // header row
            }
            if record.len() != 3 {
                return Err(MetricsError::Parse {
                    line: idx + 1,
                    message: format!("expected 3 fields, found {}", record.len()),
                });
            }
            let value: f64 = record[2].parse().map_err(|_| MetricsError::Parse {
                line: idx + 1,
                message: format!("non-numeric value {:?}", &record[2]),
            })?;
            let row = ExternalRow {
                summary_id: record[0].to_string(),
                metric: record[1].to_string(),
                value,
            };
            push_row(row, catalog, &mut seen, &mut out)?;
        }
    }
    Ok(out)
}

impl MetricCatalog {
    /// Register an externally computed metric id. Unknown ids are accepted
    /// and default to higher-is-better.
    pub fn register_external(&mut self, metric_id: &str) -> Direction {
        if let Some(direction) = self.direction(metric_id) {
            return direction;
        }
        self.registered
            .insert(metric_id.to_string(), Direction::HigherBetter);
        Direction::HigherBetter
    }
}
