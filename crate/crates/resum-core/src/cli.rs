//! The `resum` command-line interface.
//!
//! Subcommands: `summarize` (initial generation only), `evaluate` (score
//! existing summaries with one agent or an ensemble), `run` (the full
//! refinement loop over a document batch), `score` (native text metrics),
//! `meta-eval` (metric-vs-human correlation report), and
//! `export-human-eval` (blinded pairwise comparison sheets).
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Data goes to the
//! output stream (or `--out`), diagnostics to the error stream.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig, StrategyKind};
use crate::evaluation::{EvalError, Evaluator};
use crate::gateway::{Gateway, GatewayConfig, GatewayError};
use crate::meta_eval::{
    correlate_with, load_dataset, render_report, MetaEvalError, PValueMethod, ReportFormat,
};
use crate::prompts::{Dimension, PromptError, PromptSet};
use crate::refine::{
    run_batch, run_loop_llm, Document, EvaluatorConfig, LoopEvaluation, RefinementTrace,
    SummaryRecord,
};
use crate::rng::SplitMix64;
use crate::text_metrics::{score_pair, DaleChallList, MetricsError, RougeScalar};

pub const CACHE_DIR_ENV: &str = "RESUM_CACHE_DIR";
pub const DALE_CHALL_ENV: &str = "RESUM_DALE_CHALL_PATH";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    MetaEval(#[from] MetaEvalError),
    #[error("{0}")]
    Other(String),
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Parser)]
#[command(
    name = "resum",
    version,
    about = "Self-reflective summarization: generate, evaluate, refine, and meta-evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Pipeline options shared by the agent-calling subcommands. Flags win
/// over environment variables, which win over the config file.
#[derive(Args, Debug)]
struct PipelineArgs {
    /// TOML config file with the agent roster and loop settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Response cache directory (env: RESUM_CACHE_DIR)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Directory with custom prompt templates
    #[arg(long)]
    prompt_dir: Option<PathBuf>,
    /// Convergence threshold
    #[arg(long)]
    tau: Option<i64>,
    /// Maximum refinements per document
    #[arg(long)]
    t_max: Option<u32>,
    /// Top of the Likert scale
    #[arg(long)]
    scale_max: Option<i64>,
    /// Comma-separated quality dimensions to evaluate
    #[arg(long, value_delimiter = ',')]
    dimensions: Option<Vec<String>>,
    /// Concurrent loops in flight
    #[arg(long)]
    parallelism: Option<usize>,
    /// single | averaging | majority_voting | leader_based
    #[arg(long)]
    strategy: Option<String>,
    /// Agent id used for generation
    #[arg(long)]
    generator: Option<String>,
    /// Comma-separated evaluator agent ids
    #[arg(long, value_delimiter = ',')]
    evaluators: Option<Vec<String>>,
    /// Agent id of the leader meta-evaluator
    #[arg(long)]
    leader: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one initial summary per document
    Summarize {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Documents file (JSONL: {id, text, domain?})
        #[arg(long)]
        docs: PathBuf,
        /// Output file (JSONL summaries; stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print rendered prompts instead of calling any endpoint
        #[arg(long)]
        dry_run: bool,
    },
    /// Score existing summaries with one agent or an ensemble
    Evaluate {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Documents file (JSONL: {id, text, domain?})
        #[arg(long)]
        docs: PathBuf,
        /// Summaries file (JSONL: {id, doc_id, system, text, iteration?})
        #[arg(long)]
        summaries: PathBuf,
        /// Output file (JSONL evaluations; stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print rendered prompts instead of calling any endpoint
        #[arg(long)]
        dry_run: bool,
    },
    /// Run the full evaluate-feedback-refine loop over a document batch
    Run {
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Documents file (JSONL: {id, text, domain?})
        #[arg(long)]
        docs: PathBuf,
        /// Output file (JSONL, one refinement trace per document)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the initial prompts instead of calling any endpoint
        #[arg(long)]
        dry_run: bool,
    },
    /// Compute the native metric suite over a summaries file
    Score {
        /// Documents file (JSONL: {id, text, domain?})
        #[arg(long)]
        docs: PathBuf,
        /// Summaries file (JSONL: {id, doc_id, system, text, iteration?})
        #[arg(long)]
        summaries: PathBuf,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv (summary_id,metric,value) or jsonl
        #[arg(long, default_value = "csv")]
        format: String,
        /// Which ROUGE scalar to export: recall or f1
        #[arg(long)]
        rouge_scalar: Option<String>,
        /// Dale-Chall familiar word list (env: RESUM_DALE_CHALL_PATH)
        #[arg(long)]
        dale_chall: Option<PathBuf>,
        /// Optional TOML config (for dale_chall_path and rouge_scalar)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Gold references file (JSONL: {doc_id, text}); when given,
        /// metrics compare against these instead of the source documents
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Correlate metric scores against human annotations
    MetaEval {
        /// Documents file (JSONL: {id, text, domain?})
        #[arg(long)]
        docs: PathBuf,
        /// Summaries file (JSONL: {id, doc_id, system, text, iteration?})
        #[arg(long)]
        summaries: PathBuf,
        /// Annotations file (JSONL: {summary_id, annotator_id, dimension,
        /// score, scale_min, scale_max})
        #[arg(long)]
        annotations: PathBuf,
        /// Metric scores file(s): JSONL or CSV rows {summary_id, metric, value}
        #[arg(long, required = true)]
        scores: Vec<PathBuf>,
        /// Report output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// table or csv
        #[arg(long, default_value = "table")]
        format: String,
        /// Restrict to these dimensions (default: all annotated)
        #[arg(long, value_delimiter = ',')]
        dimensions: Option<Vec<String>>,
        /// Correlation modes to compute
        #[arg(long, value_delimiter = ',', default_values = ["macro", "micro"])]
        modes: Vec<String>,
        /// Dataset label carried in every report row
        #[arg(long, default_value = "dataset")]
        dataset_name: String,
        /// Use a seeded permutation p-value when n < 15
        #[arg(long)]
        small_sample_permutation: bool,
        /// Permutation rounds for small-sample p-values
        #[arg(long, default_value_t = 10000)]
        permutation_rounds: usize,
        /// Seed for the permutation test
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Export blinded initial-vs-final comparison sheets from traces
    ExportHumanEval {
        /// Traces file produced by `resum run`
        #[arg(long)]
        traces: PathBuf,
        /// Documents file; when given, the sheet includes document text
        #[arg(long)]
        docs: Option<PathBuf>,
        /// Blinded sheet output (CSV)
        #[arg(long)]
        out: PathBuf,
        /// Unblinding key output (CSV; defaults to <out>.key.csv)
        #[arg(long)]
        key: Option<PathBuf>,
        /// Seed for the randomized A/B presentation order
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Parse argv and run. Returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(matches) => matches,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            1
        }
    }
}

fn env_path(name: &str) -> Option<PathBuf> {
    std::env::var_os(name)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn resolve_config(args: &PipelineArgs) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.cache_dir {
        config.cache_dir = Some(v.clone());
    } else if config.cache_dir.is_none() {
        config.cache_dir = env_path(CACHE_DIR_ENV);
    }
    if let Some(v) = &args.prompt_dir {
        config.prompt_dir = Some(v.clone());
    }
    if let Some(v) = args.tau {
        config.tau = v;
    }
    if let Some(v) = args.t_max {
        config.t_max = v;
    }
    if let Some(v) = args.scale_max {
        config.scale_max = v;
    }
    if let Some(labels) = &args.dimensions {
        let mut dimensions = Vec::with_capacity(labels.len());
        for label in labels {
            dimensions.push(label.parse::<Dimension>().map_err(CliError::Other)?);
        }
        config.dimensions = dimensions;
    }
    if let Some(v) = args.parallelism {
        config.parallelism = v.max(1);
    }
    if let Some(v) = &args.strategy {
        config.strategy = StrategyKind::parse(v)?;
    }
    if let Some(v) = &args.generator {
        config.generator_id = Some(v.clone());
    }
    if let Some(v) = &args.evaluators {
        config.evaluator_ids = v.clone();
    }
    if let Some(v) = &args.leader {
        config.leader_id = Some(v.clone());
    }
    config.validate()?;
    Ok(config)
}

fn build_gateway(config: &RunConfig) -> Result<Gateway, CliError> {
    let cache_dir = config
        .cache_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("resum-cache"));
    Ok(Gateway::new(GatewayConfig::new(cache_dir))?)
}

fn build_prompts(config: &RunConfig) -> Result<PromptSet, CliError> {
    Ok(match &config.prompt_dir {
        Some(dir) => PromptSet::from_dir(dir)?,
        None => PromptSet::builtin(),
    })
}

fn load_documents(path: &Path) -> Result<Vec<Document>, CliError> {
    Ok(crate::meta_eval::read_jsonl(path)?)
}

fn load_summaries(path: &Path) -> Result<Vec<SummaryRecord>, CliError> {
    Ok(crate::meta_eval::read_jsonl(path)?)
}

/// Sink for data output: a file when `--out` is given, stdout otherwise.
fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        }),
        None => {
            let stdout = std::io::stdout();
            let mut handle = stdout.lock();
            handle
                .write_all(content.as_bytes())
                .map_err(|source| CliError::Write {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("output records serialize"));
        out.push('\n');
    }
    out
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Summarize {
            pipeline,
            docs,
            out,
            dry_run,
        } => summarize(&pipeline, &docs, out.as_deref(), dry_run),
        Command::Evaluate {
            pipeline,
            docs,
            summaries,
            out,
            dry_run,
        } => evaluate(&pipeline, &docs, &summaries, out.as_deref(), dry_run),
        Command::Run {
            pipeline,
            docs,
            out,
            dry_run,
        } => run(&pipeline, &docs, out.as_deref(), dry_run),
        Command::Score {
            docs,
            summaries,
            out,
            format,
            rouge_scalar,
            dale_chall,
            config,
            references,
        } => score(
            &docs,
            &summaries,
            out.as_deref(),
            &format,
            rouge_scalar.as_deref(),
            dale_chall.as_deref(),
            config.as_deref(),
            references.as_deref(),
        ),
        Command::MetaEval {
            docs,
            summaries,
            annotations,
            scores,
            out,
            format,
            dimensions,
            modes,
            dataset_name,
            small_sample_permutation,
            permutation_rounds,
            seed,
        } => meta_eval(MetaEvalArgs {
            docs,
            summaries,
            annotations,
            scores,
            out,
            format,
            dimensions,
            modes,
            dataset_name,
            small_sample_permutation,
            permutation_rounds,
            seed,
        }),
        Command::ExportHumanEval {
            traces,
            docs,
            out,
            key,
            seed,
        } => export_human_eval(&traces, docs.as_deref(), &out, key.as_deref(), seed),
    }
}

fn summarize(
    pipeline: &PipelineArgs,
    docs: &Path,
    out: Option<&Path>,
    dry_run: bool,
) -> Result<(), CliError> {
    let config = resolve_config(pipeline)?;
    let prompts = build_prompts(&config)?;
    let documents = load_documents(docs)?;
    let generator_id = config
        .generator_id
        .clone()
        .ok_or_else(|| CliError::Other("no generator configured".into()))?;

    if dry_run {
        let mut rendered = String::new();
        for document in &documents {
            let (system, user) = prompts.render_initial(&document.text)?;
            rendered.push_str(&format!(
                "=== {} (generator: {generator_id}) ===\n--- system ---\n{system}\n--- user ---\n{user}\n",
                document.id
            ));
        }
        return write_output(out, &rendered);
    }

    let generator = config.agent(&generator_id)?.clone();
    let gateway = build_gateway(&config)?;
    let mut records = Vec::with_capacity(documents.len());
    for document in &documents {
        let (system, user) = prompts.render_initial(&document.text)?;
        let response = gateway.complete(&crate::gateway::ChatRequest::new(
            &generator, &system, &user,
        ))?;
        records.push(SummaryRecord {
            id: format!("{}#0", document.id),
            doc_id: document.id.clone(),
            system: generator_id.clone(),
            text: response.text,
            iteration: 0,
        });
    }
    write_output(out, &jsonl(records))
}

fn evaluate(
    pipeline: &PipelineArgs,
    docs: &Path,
    summaries: &Path,
    out: Option<&Path>,
    dry_run: bool,
) -> Result<(), CliError> {
    let config = resolve_config(pipeline)?;
    let prompts = build_prompts(&config)?;
    let documents = load_documents(docs)?;
    let summaries = load_summaries(summaries)?;
    let by_id: BTreeMap<&str, &Document> =
        documents.iter().map(|d| (d.id.as_str(), d)).collect();

    if dry_run {
        let mut rendered = String::new();
        for summary in &summaries {
            let document = by_id.get(summary.doc_id.as_str()).ok_or_else(|| {
                CliError::Other(format!(
                    "summary {:?} references unknown document {:?}",
                    summary.id, summary.doc_id
                ))
            })?;
            let (system, user) = prompts.render_evaluation(&document.text, &summary.text)?;
            rendered.push_str(&format!(
                "=== {} ===\n--- system ---\n{system}\n--- user ---\n{user}\n",
                summary.id
            ));
        }
        return write_output(out, &rendered);
    }

    let evaluator_config = config.evaluator_config()?;
    let gateway = build_gateway(&config)?;
    let evaluator = Evaluator::new(&gateway, &prompts)
        .with_scale_max(config.scale_max)
        .with_dimensions(config.dimensions.clone());

    let mut results: Vec<LoopEvaluation> = Vec::with_capacity(summaries.len());
    for summary in &summaries {
        let document = by_id.get(summary.doc_id.as_str()).ok_or_else(|| {
            CliError::Other(format!(
                "summary {:?} references unknown document {:?}",
                summary.id, summary.doc_id
            ))
        })?;
        let evaluation = match &evaluator_config {
            EvaluatorConfig::Single { agent } => LoopEvaluation::Single(
                evaluator.evaluate_single(agent, &document.text, &summary.text, &summary.id)?,
            ),
            EvaluatorConfig::Ensemble { agents, strategy } => {
                LoopEvaluation::Aggregated(Box::new(evaluator.evaluate_multi(
                    agents,
                    strategy,
                    &document.text,
                    &summary.text,
                    &summary.id,
                )?))
            }
        };
        results.push(evaluation);
    }
    write_output(out, &jsonl(results))
}

fn run(
    pipeline: &PipelineArgs,
    docs: &Path,
    out: Option<&Path>,
    dry_run: bool,
) -> Result<(), CliError> {
    let config = resolve_config(pipeline)?;
    let prompts = build_prompts(&config)?;
    let documents = load_documents(docs)?;
    let loop_config = config.loop_config()?;

    if dry_run {
        let mut rendered = String::new();
        for document in &documents {
            let (system, user) = prompts.render_initial(&document.text)?;
            rendered.push_str(&format!(
                "=== {} (iteration 0) ===\n--- system ---\n{system}\n--- user ---\n{user}\n",
                document.id
            ));
        }
        return write_output(out, &rendered);
    }

    let gateway = build_gateway(&config)?;
    let traces: Vec<RefinementTrace> = run_batch(&documents, config.parallelism, |document| {
        run_loop_llm(document, &loop_config, &gateway, &prompts)
    });
    for trace in &traces {
        if let Some(error) = &trace.error {
            eprintln!("warning: document {}: {error}", trace.document_id);
        }
    }
    write_output(out, &jsonl(traces))
}

#[derive(Serialize, Deserialize)]
struct ScoreRow {
    summary_id: String,
    metric: String,
    value: f64,
}

#[derive(Deserialize)]
struct GoldReference {
    doc_id: String,
    text: String,
}

#[allow(clippy::too_many_arguments)]
fn score(
    docs: &Path,
    summaries: &Path,
    out: Option<&Path>,
    format: &str,
    rouge_scalar: Option<&str>,
    dale_chall: Option<&Path>,
    config: Option<&Path>,
    references: Option<&Path>,
) -> Result<(), CliError> {
    let config = match config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let scalar = match rouge_scalar {
        Some("recall") => RougeScalar::Recall,
        Some("f1") => RougeScalar::F1,
        Some(other) => {
            return Err(CliError::Other(format!(
                "unknown rouge scalar {other:?} (expected recall or f1)"
            )))
        }
        None => config.rouge_scalar,
    };
    let list_path = dale_chall
        .map(Path::to_path_buf)
        .or_else(|| env_path(DALE_CHALL_ENV))
        .or_else(|| config.dale_chall_path.clone())
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/dale_chall.txt"));
    let familiar = DaleChallList::load(&list_path)?;

    let documents = load_documents(docs)?;
    let summaries = load_summaries(summaries)?;
    let doc_text: BTreeMap<&str, &str> = documents
        .iter()
        .map(|d| (d.id.as_str(), d.text.as_str()))
        .collect();
    let gold: Option<BTreeMap<String, String>> = match references {
        Some(path) => {
            let refs: Vec<GoldReference> = crate::meta_eval::read_jsonl(path)?;
            Some(refs.into_iter().map(|r| (r.doc_id, r.text)).collect())
        }
        None => None,
    };

    let mut rows = Vec::new();
    for summary in &summaries {
        let reference = match &gold {
            Some(map) => map.get(&summary.doc_id).map(String::as_str).ok_or_else(|| {
                CliError::Other(format!(
                    "no gold reference for document {:?}",
                    summary.doc_id
                ))
            })?,
            None => doc_text.get(summary.doc_id.as_str()).copied().ok_or_else(|| {
                CliError::Other(format!(
                    "summary {:?} references unknown document {:?}",
                    summary.id, summary.doc_id
                ))
            })?,
        };
        for (metric, value) in score_pair(&summary.text, reference, scalar, &familiar)? {
            rows.push(ScoreRow {
                summary_id: summary.id.clone(),
                metric,
                value,
            });
        }
    }

    let content = match format {
        "jsonl" => jsonl(rows),
        "csv" => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(["summary_id", "metric", "value"])
                .expect("csv header");
            for row in rows {
                writer
                    .write_record([&row.summary_id, &row.metric, &row.value.to_string()])
                    .expect("csv row");
            }
            String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv is utf-8")
        }
        other => {
            return Err(CliError::Other(format!(
                "unknown format {other:?} (expected csv or jsonl)"
            )))
        }
    };
    write_output(out, &content)
}

struct MetaEvalArgs {
    docs: PathBuf,
    summaries: PathBuf,
    annotations: PathBuf,
    scores: Vec<PathBuf>,
    out: Option<PathBuf>,
    format: String,
    dimensions: Option<Vec<String>>,
    modes: Vec<String>,
    dataset_name: String,
    small_sample_permutation: bool,
    permutation_rounds: usize,
    seed: u64,
}

fn meta_eval(args: MetaEvalArgs) -> Result<(), CliError> {
    let dataset = load_dataset(
        &args.dataset_name,
        &args.docs,
        &args.summaries,
        &args.annotations,
    )?;
    let mut catalog = crate::text_metrics::MetricCatalog::new();
    let mut all_scores = Vec::new();
    for path in &args.scores {
        all_scores.extend(crate::text_metrics::ingest_external_scores(path, &mut catalog)?);
    }

    let dimensions: Vec<Dimension> = match &args.dimensions {
        Some(labels) => labels
            .iter()
            .map(|l| l.parse::<Dimension>().map_err(CliError::Other))
            .collect::<Result<_, _>>()?,
        None => dataset.dimensions.clone(),
    };
    let modes: Vec<crate::meta_eval::CorrelationMode> = args
        .modes
        .iter()
        .map(|m| match m.as_str() {
            "macro" => Ok(crate::meta_eval::CorrelationMode::Macro),
            "micro" => Ok(crate::meta_eval::CorrelationMode::Micro),
            other => Err(CliError::Other(format!(
                "unknown mode {other:?} (expected macro or micro)"
            ))),
        })
        .collect::<Result<_, _>>()?;
    let format = match args.format.as_str() {
        "table" => ReportFormat::Table,
        "csv" => ReportFormat::Delimited,
        other => {
            return Err(CliError::Other(format!(
                "unknown format {other:?} (expected table or csv)"
            )))
        }
    };
    let p_method = if args.small_sample_permutation {
        PValueMethod::PermutationBelow {
            threshold: 15,
            rounds: args.permutation_rounds,
            seed: args.seed,
        }
    } else {
        PValueMethod::NormalApprox
    };

    let mut by_metric: BTreeMap<&str, Vec<&crate::text_metrics::MetricScore>> = BTreeMap::new();
    for score in &all_scores {
        by_metric.entry(&score.metric_id).or_default().push(score);
    }

    let mut results = Vec::new();
    for (metric_id, scores) in &by_metric {
        let owned: Vec<crate::text_metrics::MetricScore> =
            scores.iter().map(|s| (*s).clone()).collect();
        for &dimension in &dimensions {
            for &mode in &modes {
                match correlate_with(&dataset, &owned, dimension, mode, p_method) {
                    Ok(result) => results.push(result),
                    Err(MetaEvalError::UndefinedCorrelation)
                    | Err(MetaEvalError::TooFewPoints { .. }) => {
                        eprintln!(
                            "warning: skipping {metric_id}/{dimension}/{mode:?}: correlation undefined"
                        );
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    write_output(args.out.as_deref(), &render_report(&results, format))
}

fn export_human_eval(
    traces_path: &Path,
    docs: Option<&Path>,
    out: &Path,
    key: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let traces: Vec<RefinementTrace> = crate::meta_eval::read_jsonl(traces_path)?;
    let doc_text: BTreeMap<String, String> = match docs {
        Some(path) => load_documents(path)?
            .into_iter()
            .map(|d| (d.id, d.text))
            .collect(),
        None => BTreeMap::new(),
    };

    let mut rng = SplitMix64::new(seed);
    let mut sheet = csv::Writer::from_writer(Vec::new());
    sheet
        .write_record(["pair_id", "document_id", "document", "summary_a", "summary_b"])
        .expect("csv header");
    let mut unblinding = csv::Writer::from_writer(Vec::new());
    unblinding
        .write_record(["pair_id", "summary_a", "summary_b"])
        .expect("csv header");

    let mut pair_index = 0usize;
    for trace in &traces {
        let (Some(first), Some(last)) = (trace.iterations.first(), &trace.final_summary) else {
            eprintln!(
                "warning: skipping document {}: no completed iterations",
                trace.document_id
            );
            continue;
        };
        let initial = first.summary.text.as_str();
        let enhanced = last.text.as_str();
        let initial_is_a = rng.next_bool();
        let (a, b, a_label, b_label) = if initial_is_a {
            (initial, enhanced, "initial", "enhanced")
        } else {
            (enhanced, initial, "enhanced", "initial")
        };
        let pair_id = format!("pair-{pair_index:04}");
        pair_index += 1;
        let document = doc_text
            .get(&trace.document_id)
            .map(String::as_str)
            .unwrap_or("");
        sheet
            .write_record([pair_id.as_str(), &trace.document_id, document, a, b])
            .expect("csv row");
        unblinding
            .write_record([pair_id.as_str(), a_label, b_label])
            .expect("csv row");
    }

    let sheet_bytes = sheet.into_inner().expect("csv flush");
    std::fs::write(out, &sheet_bytes).map_err(|source| CliError::Write {
        path: out.display().to_string(),
        source,
    })?;
    let key_path = key
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("key.csv"));
    let key_bytes = unblinding.into_inner().expect("csv flush");
    std::fs::write(&key_path, key_bytes).map_err(|source| CliError::Write {
        path: key_path.display().to_string(),
        source,
    })?;
    Ok(())
}
