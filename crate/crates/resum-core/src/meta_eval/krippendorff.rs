//! Krippendorff's α from a (possibly sparse) annotator × item matrix,
//! via the coincidence matrix over value categories. Missing cells are
//! simply absent rows; items with fewer than two annotations cannot be
//! paired and are skipped.

use std::collections::BTreeMap;

use super::MetaEvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    /// Squared difference of the raw values; the default for Likert data.
    Interval,
    /// Squared difference of cumulative category frequencies.
    Ordinal,
}

/// One annotation: (annotator, item, value).
pub type AnnotationCell = (String, String, f64);

pub fn krippendorff_alpha(
    cells: &[AnnotationCell],
    kind: DistanceKind,
) -> Result<f64, MetaEvalError> {
    let mut annotators: Vec<&str> = cells.iter().map(|(a, _, _)| a.as_str()).collect();
    annotators.sort_unstable();
    annotators.dedup();
    if annotators.len() < 2 {
        return Err(MetaEvalError::InsufficientAnnotations(
            "at least two annotators required".into(),
        ));
    }
    if cells.iter().any(|(_, _, v)| !v.is_finite()) {
        return Err(MetaEvalError::InvalidData(
            "annotation values must be finite".into(),
        ));
    }

    // group values by item; only items with >= 2 values are pairable
    let mut by_item: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (_, item, value) in cells {
        by_item.entry(item.as_str()).or_default().push(*value);
    }
    let pairable: Vec<&Vec<f64>> = by_item.values().filter(|vs| vs.len() >= 2).collect();
    if pairable.is_empty() {
        return Err(MetaEvalError::InsufficientAnnotations(
            "no item has two or more annotations".into(),
        ));
    }

    // category index over observed values
    let mut categories: Vec<f64> = pairable.iter().flat_map(|vs| vs.iter().copied()).collect();
    categories.sort_by(|a, b| a.total_cmp(b));
    categories.dedup();
    let index_of = |v: f64| -> usize {
        categories
            .binary_search_by(|c| c.total_cmp(&v))
            .expect("every value was indexed")
    };
    let k = categories.len();

    // coincidence matrix: each ordered within-item pair contributes
    // 1/(m_u - 1)
    let mut coincidence = vec![vec![0.0f64; k]; k];
    for values in &pairable {
        let m = values.len() as f64;
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    coincidence[index_of(a)][index_of(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let marginals: Vec<f64> = (0..k)
        .map(|c| coincidence[c].iter().sum::<f64>())
        .collect();
    let n: f64 = marginals.iter().sum();

    let distance_sq = |c: usize, d: usize| -> f64 {
        match kind {
            DistanceKind::Interval => {
                let diff = categories[c] - categories[d];
                diff * diff
            }
            DistanceKind::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let between: f64 = (lo..=hi).map(|g| marginals[g]).sum();
                let diff = between - (marginals[lo] + marginals[hi]) / 2.0;
                diff * diff
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let delta = distance_sq(c, d);
            observed += coincidence[c][d] * delta;
            expected += marginals[c] * marginals[d] * delta;
        }
    }
    let d_observed = observed / n;
    let d_expected = expected / (n * (n - 1.0));
    if d_expected == 0.0 {
        // every paired value identical: perfect agreement by definition
        return Ok(1.0);
    }
    Ok(1.0 - d_observed / d_expected)
}
