//! Correlation report rendering: an aligned text table with significance
//! stars, or a comma-delimited form carrying full precision.

use super::{CorrelationMode, CorrelationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Delimited,
}

/// Star annotation: ***p<0.001, **p<0.01, *p<0.05, strict upper bounds.
pub fn significance_stars(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

fn mode_label(mode: CorrelationMode) -> &'static str {
    match mode {
        CorrelationMode::Macro => "macro",
        CorrelationMode::Micro => "micro",
    }
}

pub fn render_report(results: &[CorrelationResult], format: ReportFormat) -> String {
    let mut sorted: Vec<&CorrelationResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.dataset, a.dimension, &a.metric_id, mode_label(a.mode)).cmp(&(
            &b.dataset,
            b.dimension,
            &b.metric_id,
            mode_label(b.mode),
        ))
    });
    match format {
        ReportFormat::Delimited => {
            let mut out = String::from("dataset,metric,dimension,mode,tau,p,n\n");
            for r in sorted {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.dataset,
                    r.metric_id,
                    r.dimension.id(),
                    mode_label(r.mode),
                    r.tau,
                    r.p_value,
                    r.n
                ));
            }
            out
        }
        ReportFormat::Table => {
            let headers = ["dataset", "dimension", "metric", "mode", "tau", "n"];
            let rows: Vec<[String; 6]> = sorted
                .iter()
                .map(|r| {
                    [
                        r.dataset.clone(),
                        r.dimension.id().to_string(),
                        r.metric_id.clone(),
                        mode_label(r.mode).to_string(),
                        format!("{:.2}{}", r.tau, significance_stars(r.p_value)),
                        r.n.to_string(),
                    ]
                })
                .collect();
            let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row.iter()) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let emit = |out: &mut String, cells: &[String]| {
                let line = cells
                    .iter()
                    .zip(&widths)
                    .map(|(cell, w)| format!("{cell:<w$}"))
                    .collect::<Vec<_>>()
                    .join("  ");
                out.push_str(line.trim_end());
                out.push('\n');
            };
            emit(
                &mut out,
                &headers.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
            );
            let mut previous_group: Option<(String, String)> = None;
            for (row, result) in rows.iter().zip(&sorted) {
                let group = (result.dataset.clone(), result.dimension.id().to_string());
                if previous_group.as_ref().is_some_and(|g| *g != group) {
                    out.push('\n');
                }
                previous_group = Some(group);
                emit(&mut out, row);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::Dimension;

    fn result(tau: f64, p: f64) -> CorrelationResult {
        CorrelationResult {
            dataset: "toy".into(),
            metric_id: "summac_cv".into(),
            dimension: Dimension::Accuracy,
            mode: CorrelationMode::Micro,
            tau,
            p_value: p,
            n: 20,
        }
    }

    #[test]
    fn star_thresholds_are_strict() {
        assert_eq!(significance_stars(0.0002), "***");
        assert_eq!(significance_stars(0.001), "**"); // boundary is exclusive
        assert_eq!(significance_stars(0.009), "**");
        assert_eq!(significance_stars(0.01), "*");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.05), "");
        assert_eq!(significance_stars(0.2), "");
    }

    #[test]
    fn table_cells_carry_stars() {
        let table = render_report(&[result(0.65, 0.0002)], ReportFormat::Table);
        assert!(table.contains("0.65***"));
        let table = render_report(&[result(0.41, 0.03)], ReportFormat::Table);
        assert!(table.contains("0.41*"));
    }

    #[test]
    fn empty_results_render_header_only() {
        let table = render_report(&[], ReportFormat::Table);
        assert_eq!(table.lines().count(), 1);
        let csv = render_report(&[], ReportFormat::Delimited);
        assert_eq!(csv, "dataset,metric,dimension,mode,tau,p,n\n");
    }

    #[test]
    fn delimited_keeps_full_precision() {
        let csv = render_report(&[result(0.6512345678901, 0.03)], ReportFormat::Delimited);
        assert!(csv.contains("0.6512345678901"));
    }
}
