//! Python bindings for the core primitives: text metrics, score
//! aggregation, rank correlation, agreement, and the prompt toolkit.
//!
//! Build with `cargo build -p resum-python`, then import the produced
//! cdylib as `resum_py` (see python/smoke_test.py).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use resum_core::meta_eval::{self, DistanceKind};
use resum_core::prompts::{self, Dimension, PromptSet, LOOP_DIMENSIONS};
use resum_core::text_metrics::{self, DaleChallList, RougeScalar, TokenSequence};

fn value_error(message: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(message.to_string())
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    text_metrics::tokenize(text).tokens().to_vec()
}

fn seq(text: &str) -> TokenSequence {
    text_metrics::tokenize(text)
}

#[pyfunction]
fn rouge_n(candidate: &str, reference: &str, n: usize) -> PyResult<(f64, f64, f64)> {
    let score = text_metrics::rouge_n(&seq(candidate), &seq(reference), n).map_err(value_error)?;
    Ok((score.precision, score.recall, score.f1))
}

#[pyfunction]
fn rouge_l(candidate: &str, reference: &str) -> (f64, f64, f64) {
    let score = text_metrics::rouge_l(&seq(candidate), &seq(reference));
    (score.precision, score.recall, score.f1)
}

#[pyfunction]
#[pyo3(signature = (candidate, reference, max_n = 4))]
fn bleu(candidate: &str, reference: &str, max_n: usize) -> PyResult<f64> {
    text_metrics::bleu(&seq(candidate), &seq(reference), max_n).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (candidate, reference, max_char_n = 6, beta = 2.0))]
fn chrf(candidate: &str, reference: &str, max_char_n: usize, beta: f64) -> PyResult<f64> {
    text_metrics::chrf(candidate, reference, max_char_n, beta).map_err(value_error)
}

#[pyfunction]
fn meteor_lite(candidate: &str, reference: &str) -> f64 {
    text_metrics::meteor_lite(&seq(candidate), &seq(reference))
}

#[pyfunction]
fn porter_stem(word: &str) -> String {
    text_metrics::porter_stem(word)
}

#[pyfunction]
fn flesch_reading_ease(text: &str) -> PyResult<f64> {
    text_metrics::flesch_reading_ease(text).map_err(value_error)
}

#[pyfunction]
fn dale_chall(text: &str, word_list_path: PathBuf) -> PyResult<f64> {
    let familiar = DaleChallList::load(&word_list_path)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    text_metrics::dale_chall(text, &familiar).map_err(value_error)
}

/// Full native metric suite for one (candidate, reference) pair, as a
/// {metric_id: value} dict.
#[pyfunction]
#[pyo3(signature = (candidate, reference, word_list_path, rouge_scalar = "recall"))]
fn score_pair(
    candidate: &str,
    reference: &str,
    word_list_path: PathBuf,
    rouge_scalar: &str,
) -> PyResult<BTreeMap<String, f64>> {
    let scalar = match rouge_scalar {
        "recall" => RougeScalar::Recall,
        "f1" => RougeScalar::F1,
        other => return Err(value_error(format!("unknown rouge_scalar {other:?}"))),
    };
    let familiar = DaleChallList::load(&word_list_path)
        .map_err(|e| PyIOError::new_err(e.to_string()))?;
    let scores =
        text_metrics::score_pair(candidate, reference, scalar, &familiar).map_err(value_error)?;
    Ok(scores.into_iter().collect())
}

#[pyfunction]
fn kendall_tau(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64)> {
    meta_eval::kendall_tau(&x, &y).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (x, y, rounds = 10000, seed = 0))]
fn kendall_tau_permutation(
    x: Vec<f64>,
    y: Vec<f64>,
    rounds: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    meta_eval::kendall_tau_permutation(&x, &y, rounds, seed).map_err(value_error)
}

/// `cells` are (annotator_id, item_id, value) triples; `level` is
/// "interval" or "ordinal".
#[pyfunction]
#[pyo3(signature = (cells, level = "interval"))]
fn krippendorff_alpha(cells: Vec<(String, String, f64)>, level: &str) -> PyResult<f64> {
    let kind = match level {
        "interval" => DistanceKind::Interval,
        "ordinal" => DistanceKind::Ordinal,
        other => return Err(value_error(format!("unknown level {other:?}"))),
    };
    meta_eval::krippendorff_alpha(&cells, kind).map_err(value_error)
}

#[pyfunction]
fn significance_stars(p_value: f64) -> &'static str {
    meta_eval::significance_stars(p_value)
}

#[pyfunction]
fn majority_vote(scores: Vec<i64>) -> PyResult<i64> {
    resum_core::evaluation::majority_vote(&scores)
        .ok_or_else(|| value_error("majority_vote requires at least one score"))
}

#[pyfunction]
fn render_initial(document: &str) -> PyResult<(String, String)> {
    PromptSet::builtin()
        .render_initial(document)
        .map_err(value_error)
}

#[pyfunction]
fn render_evaluation(document: &str, summary: &str) -> PyResult<(String, String)> {
    PromptSet::builtin()
        .render_evaluation(document, summary)
        .map_err(value_error)
}

/// Parse an evaluator response into {dimension: {"score": int,
/// "rationale": str}}.
#[pyfunction]
#[pyo3(signature = (text, scale_max = 5))]
fn parse_evaluation_response(
    py: Python<'_>,
    text: &str,
    scale_max: i64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let parsed = prompts::parse_evaluation_response(text, scale_max, &LOOP_DIMENSIONS)
        .map_err(value_error)?;
    let out = pyo3::types::PyDict::new(py);
    for (dimension, entry) in parsed {
        let item = pyo3::types::PyDict::new(py);
        item.set_item("score", entry.score)?;
        item.set_item("rationale", entry.rationale)?;
        out.set_item(dimension_id(dimension), item)?;
    }
    Ok(out.into())
}

fn dimension_id(dimension: Dimension) -> &'static str {
    dimension.id()
}

#[pymodule]
fn resum_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_n, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(chrf, m)?)?;
    m.add_function(wrap_pyfunction!(meteor_lite, m)?)?;
    m.add_function(wrap_pyfunction!(porter_stem, m)?)?;
    m.add_function(wrap_pyfunction!(flesch_reading_ease, m)?)?;
    m.add_function(wrap_pyfunction!(dale_chall, m)?)?;
    m.add_function(wrap_pyfunction!(score_pair, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau_permutation, m)?)?;
    m.add_function(wrap_pyfunction!(krippendorff_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(significance_stars, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(render_initial, m)?)?;
    m.add_function(wrap_pyfunction!(render_evaluation, m)?)?;
    m.add_function(wrap_pyfunction!(parse_evaluation_response, m)?)?;
    Ok(())
}
