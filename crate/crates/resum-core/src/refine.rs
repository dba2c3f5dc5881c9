//! The self-reflective summarization loop.
//!
//! One run: generate an initial summary, evaluate it on the four loop
//! dimensions, and while any dimension scores below the threshold τ, build
//! structured feedback from the deficient dimensions and ask the generator
//! for a refined summary. The loop stops as soon as every dimension reaches
//! τ, or after `t_max` refinements, in which case the iterate with the
//! highest minimum dimension score is returned (earliest iterate on ties).
//!
//! Every iteration is recorded in a [`RefinementTrace`]: prompts, parsed
//! scores, rationales, feedback, and the termination reason. Traces
//! serialize one-per-line and are the audit log the rest of the pipeline
//! consumes.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{AggregatedEvaluation, AggregationStrategy, Evaluator};
use crate::gateway::{AgentSpec, ChatRequest, Gateway};
use crate::prompts::{Dimension, EvaluationResult, FeedbackLine, PromptSet, LOOP_DIMENSIONS};

/// A source document to be summarized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

/// A generated summary with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub doc_id: String,
    /// Which system produced it (an agent id, or an external system label).
    pub system: String,
    pub text: String,
    #[serde(default)]
    pub iteration: u32,
}

/// The system and user message actually sent for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptExchange {
    pub system_message: String,
    pub user_message: String,
}

/// The evaluation consumed by the loop: either one agent's verdict or an
/// aggregated ensemble verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LoopEvaluation {
    Single(EvaluationResult),
    Aggregated(Box<AggregatedEvaluation>),
}

impl LoopEvaluation {
    pub fn scores(&self) -> BTreeMap<Dimension, Rational64> {
        match self {
            LoopEvaluation::Single(e) => e
                .per_dimension
                .iter()
                .map(|(&d, entry)| (d, Rational64::from_integer(entry.score)))
                .collect(),
            LoopEvaluation::Aggregated(a) => a.per_dimension.clone(),
        }
    }

    pub fn rationale_for(&self, dimension: Dimension) -> String {
        match self {
            LoopEvaluation::Single(e) => e
                .per_dimension
                .get(&dimension)
                .map(|entry| entry.rationale.clone())
                .unwrap_or_default(),
            LoopEvaluation::Aggregated(a) => a.rationale_for(dimension),
        }
    }

    pub fn min_score(&self) -> Rational64 {
        self.scores()
            .values()
            .copied()
            .min()
            .expect("evaluations always cover at least one dimension")
    }
}

/// One feedback entry: the deficient score and the rationale copied
/// verbatim from the evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub score: Rational64,
    pub rationale: String,
}

/// The structured deficiency report passed into refinement. Only
/// dimensions scoring strictly below τ appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub entries: BTreeMap<Dimension, FeedbackEntry>,
    pub iteration: u32,
}

impl Feedback {
    pub fn prompt_lines(&self) -> Vec<FeedbackLine> {
        self.entries
            .iter()
            .map(|(&dimension, entry)| FeedbackLine {
                dimension,
                score: format_score(entry.score),
                rationale: entry.rationale.clone(),
            })
            .collect()
    }
}

/// Integer scores print bare ("3"); averaged rationals print with two
/// decimals ("3.67").
pub fn format_score(score: Rational64) -> String {
    if score.is_integer() {
        score.numer().to_string()
    } else {
        format!("{:.2}", score.to_f64().unwrap_or(f64::NAN))
    }
}

/// Deficient dimensions of an evaluation: exactly `{i : q_i < tau}`, with
/// rationales copied verbatim. `None` when every dimension meets τ.
/// Averaged (rational) scores compare against τ exactly.
pub fn build_feedback(
    evaluation: &LoopEvaluation,
    tau: i64,
    iteration: u32,
) -> Option<Feedback> {
    let threshold = Rational64::from_integer(tau);
    let entries: BTreeMap<Dimension, FeedbackEntry> = evaluation
        .scores()
        .into_iter()
        .filter(|(_, score)| *score < threshold)
        .map(|(dimension, score)| {
            (
                dimension,
                FeedbackEntry {
                    score,
                    rationale: evaluation.rationale_for(dimension),
                },
            )
        })
        .collect();
    if entries.is_empty() {
        None
    } else {
        Some(Feedback { entries, iteration })
    }
}

/// The evaluator side of a loop configuration: one agent, or an ensemble
/// with an aggregation strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum EvaluatorConfig {
    Single { agent: AgentSpec },
    Ensemble {
        agents: Vec<AgentSpec>,
        strategy: AggregationStrategy,
    },
}

/// Full configuration for one loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    /// Convergence threshold: refinement stops once every dimension
    /// scores at least this much.
    pub tau: i64,
    /// Maximum number of refinements.
    pub t_max: u32,
    /// Top of the Likert scale.
    pub scale_max: i64,
    pub generator: AgentSpec,
    pub evaluator: EvaluatorConfig,
    pub dimensions: Vec<Dimension>,
}

impl LoopConfig {
    pub fn new(generator: AgentSpec, evaluator: EvaluatorConfig) -> Self {
        Self {
            tau: 4,
            t_max: 3,
            scale_max: 5,
            generator,
            evaluator,
            dimensions: LOOP_DIMENSIONS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<(), LoopConfigError> {
        if self.tau < 1 || self.tau > self.scale_max {
            return Err(LoopConfigError(format!(
                "tau must lie in [1, {}], got {}",
                self.scale_max, self.tau
            )));
        }
        if self.t_max < 1 {
            return Err(LoopConfigError("t_max must be at least 1".into()));
        }
        if self.dimensions.is_empty() {
            return Err(LoopConfigError("at least one dimension required".into()));
        }
        if let EvaluatorConfig::Ensemble { agents, strategy } = &self.evaluator {
            if agents.is_empty() {
                return Err(LoopConfigError("ensemble requires at least one agent".into()));
            }
            if matches!(strategy, AggregationStrategy::LeaderBased { .. }) && agents.len() < 2 {
                return Err(LoopConfigError(
                    "leader-based aggregation requires at least two agents".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
#[error("invalid loop config: {0}")]
pub struct LoopConfigError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ThresholdMet,
    MaxIterations,
    Error,
}

/// One loop iteration: the summary, the prompts that produced and judged
/// it, the evaluation, and the feedback built from it (absent when the
/// iteration met the threshold or was the post-loop fallback evaluation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub summary: SummaryRecord,
    pub generation_prompt: PromptExchange,
    pub evaluation_prompt: PromptExchange,
    pub evaluation: LoopEvaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<Feedback>,
}

impl IterationRecord {
    pub fn min_score(&self) -> Rational64 {
        self.evaluation.min_score()
    }
}

/// The complete audit record of one loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTrace {
    pub document_id: String,
    pub iterations: Vec<IterationRecord>,
    #[serde(rename = "final")]
    pub final_summary: Option<SummaryRecord>,
    pub termination: Termination,
    pub selected_iteration: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RefinementTrace {
    fn errored(document_id: &str, iterations: Vec<IterationRecord>, error: String) -> Self {
        Self {
            document_id: document_id.to_string(),
            iterations,
            final_summary: None,
            termination: Termination::Error,
            selected_iteration: None,
            error: Some(error),
        }
    }
}

/// A stage failure, tagged with where in the loop it happened.
#[derive(Debug, Error)]
#[error("{stage} failed at iteration {iteration}: {message}")]
pub struct StageError {
    pub stage: &'static str,
    pub iteration: u32,
    pub message: String,
}

/// Produced summary text plus the prompt that asked for it.
#[derive(Debug, Clone)]
pub struct GeneratedSummary {
    pub text: String,
    pub prompt: PromptExchange,
}

/// Summary production: the initial pass and feedback-guided refinement.
/// The loop is generic over this so termination behavior can be tested
/// against scripted stages without any endpoint.
pub trait SummaryGenerator: Sync {
    /// Label recorded as the summary's producing system.
    fn label(&self) -> String;

    fn initial(&self, document: &Document) -> Result<GeneratedSummary, String>;

    fn refine(
        &self,
        document: &Document,
        previous: &SummaryRecord,
        feedback: &Feedback,
    ) -> Result<GeneratedSummary, String>;
}

/// Summary judgment: scores plus rationales for every loop dimension.
pub trait SummaryEvaluator: Sync {
    fn evaluate(
        &self,
        document: &Document,
        summary: &SummaryRecord,
    ) -> Result<(LoopEvaluation, PromptExchange), String>;
}

fn summary_record(document: &Document, system: &str, text: String, iteration: u32) -> SummaryRecord {
    SummaryRecord {
        id: format!("{}#{}", document.id, iteration),
        doc_id: document.id.clone(),
        system: system.to_string(),
        text,
        iteration,
    }
}

/// Run the full loop for one document.
///
/// Call budget: at most `t_max` refinements and `t_max + 1` evaluations.
/// When the refinement budget is exhausted, the last refined summary is
/// evaluated too (the fallback selection needs its scores), and the
/// returned summary is the iterate maximizing the minimum dimension score,
/// earliest first on ties. If that last evaluation itself meets τ the run
/// counts as threshold convergence.
pub fn run_loop(
    document: &Document,
    tau: i64,
    t_max: u32,
    generator: &dyn SummaryGenerator,
    evaluator: &dyn SummaryEvaluator,
) -> RefinementTrace {
    let threshold = Rational64::from_integer(tau);
    let system = generator.label();
    let mut iterations: Vec<IterationRecord> = Vec::new();

    let mut current = match generator.initial(document) {
        Ok(generated) if generated.text.is_empty() => {
            return RefinementTrace::errored(
                &document.id,
                iterations,
                StageError {
                    stage: "generation",
                    iteration: 0,
                    message: "empty completion".into(),
                }
                .to_string(),
            )
        }
        Ok(generated) => (
            summary_record(document, &system, generated.text, 0),
            generated.prompt,
        ),
        Err(message) => {
            return RefinementTrace::errored(
                &document.id,
                iterations,
                StageError {
                    stage: "generation",
                    iteration: 0,
                    message,
                }
                .to_string(),
            )
        }
    };

    for t in 0..=t_max {
        let (summary, generation_prompt) = current;
        let (evaluation, evaluation_prompt) = match evaluator.evaluate(document, &summary) {
            Ok(outcome) => outcome,
            Err(message) => {
                return RefinementTrace::errored(
                    &document.id,
                    iterations,
                    StageError {
                        stage: "evaluation",
                        iteration: t,
                        message,
                    }
                    .to_string(),
                )
            }
        };

        if evaluation.min_score() >= threshold {
            iterations.push(IterationRecord {
                summary: summary.clone(),
                generation_prompt,
                evaluation_prompt,
                evaluation,
                feedback: None,
            });
            return RefinementTrace {
                document_id: document.id.clone(),
                iterations,
                final_summary: Some(summary),
                termination: Termination::ThresholdMet,
                selected_iteration: Some(t),
                error: None,
            };
        }

        if t == t_max {
            // refinement budget exhausted; this evaluation only feeds the
            // fallback selection
            iterations.push(IterationRecord {
                summary,
                generation_prompt,
                evaluation_prompt,
                evaluation,
                feedback: None,
            });
            let best = iterations
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| {
                    a.min_score()
                        .cmp(&b.min_score())
                        .then(j.cmp(i)) // earliest wins ties
                })
                .map(|(i, _)| i)
                .expect("at least one iteration recorded");
            return RefinementTrace {
                document_id: document.id.clone(),
                final_summary: Some(iterations[best].summary.clone()),
                selected_iteration: Some(best as u32),
                iterations,
                termination: Termination::MaxIterations,
                error: None,
            };
        }

        let feedback = build_feedback(&evaluation, tau, t)
            .expect("below-threshold evaluation always yields feedback");
        iterations.push(IterationRecord {
            summary: summary.clone(),
            generation_prompt,
            evaluation_prompt,
            evaluation,
            feedback: Some(feedback.clone()),
        });

        current = match generator.refine(document, &summary, &feedback) {
            Ok(generated) if generated.text.is_empty() => {
                return RefinementTrace::errored(
                    &document.id,
                    iterations,
                    StageError {
                        stage: "refinement",
                        iteration: t + 1,
                        message: "empty completion".into(),
                    }
                    .to_string(),
                )
            }
            Ok(generated) => (
                summary_record(document, &system, generated.text, t + 1),
                generated.prompt,
            ),
            Err(message) => {
                return RefinementTrace::errored(
                    &document.id,
                    iterations,
                    StageError {
                        stage: "refinement",
                        iteration: t + 1,
                        message,
                    }
                    .to_string(),
                )
            }
        };
    }
    unreachable!("loop returns from within the iteration body");
}

/// Run many documents with at most `parallelism` loops in flight. Output
/// order matches input order; a document's failure is confined to its own
/// trace.
pub fn run_batch<F>(documents: &[Document], parallelism: usize, run_one: F) -> Vec<RefinementTrace>
where
    F: Fn(&Document) -> RefinementTrace + Sync,
{
    let parallelism = parallelism.max(1);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<RefinementTrace>>> =
        Mutex::new((0..documents.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..parallelism.min(documents.len().max(1)) {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= documents.len() {
                    break;
                }
                let trace = run_one(&documents[index]);
                results.lock().unwrap()[index] = Some(trace);
            });
        }
    });

    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|t| t.expect("every document produces a trace"))
        .collect()
}

/// Generator backed by the gateway and the shipped prompt templates.
pub struct LlmGenerator<'a> {
    gateway: &'a Gateway,
    prompts: &'a PromptSet,
    agent: AgentSpec,
}

impl<'a> LlmGenerator<'a> {
    pub fn new(gateway: &'a Gateway, prompts: &'a PromptSet, agent: AgentSpec) -> Self {
        Self {
            gateway,
            prompts,
            agent,
        }
    }
}

impl SummaryGenerator for LlmGenerator<'_> {
    fn label(&self) -> String {
        self.agent.agent_id.clone()
    }

    fn initial(&self, document: &Document) -> Result<GeneratedSummary, String> {
        let (system, user) = self
            .prompts
            .render_initial(&document.text)
            .map_err(|e| e.to_string())?;
        let response = self
            .gateway
            .complete(&ChatRequest::new(&self.agent, &system, &user))
            .map_err(|e| e.to_string())?;
        Ok(GeneratedSummary {
            text: response.text,
            prompt: PromptExchange {
                system_message: system,
                user_message: user,
            },
        })
    }

    fn refine(
        &self,
        document: &Document,
        previous: &SummaryRecord,
        feedback: &Feedback,
    ) -> Result<GeneratedSummary, String> {
        let (system, user) = self
            .prompts
            .render_refinement(&document.text, &previous.text, &feedback.prompt_lines())
            .map_err(|e| e.to_string())?;
        let response = self
            .gateway
            .complete(&ChatRequest::new(&self.agent, &system, &user))
            .map_err(|e| e.to_string())?;
        Ok(GeneratedSummary {
            text: response.text,
            prompt: PromptExchange {
                system_message: system,
                user_message: user,
            },
        })
    }
}

/// Evaluator backed by the gateway: a single agent or an ensemble.
pub struct LlmLoopEvaluator<'a> {
    evaluator: Evaluator<'a>,
    config: EvaluatorConfig,
}

impl<'a> LlmLoopEvaluator<'a> {
    pub fn new(
        gateway: &'a Gateway,
        prompts: &'a PromptSet,
        config: EvaluatorConfig,
        scale_max: i64,
        dimensions: Vec<Dimension>,
    ) -> Self {
        Self {
            evaluator: Evaluator::new(gateway, prompts)
                .with_scale_max(scale_max)
                .with_dimensions(dimensions),
            config,
        }
    }
}

impl SummaryEvaluator for LlmLoopEvaluator<'_> {
    fn evaluate(
        &self,
        document: &Document,
        summary: &SummaryRecord,
    ) -> Result<(LoopEvaluation, PromptExchange), String> {
        let (system, user) = self
            .evaluator
            .evaluation_prompt(&document.text, &summary.text)
            .map_err(|e| e.to_string())?;
        let prompt = PromptExchange {
            system_message: system,
            user_message: user,
        };
        let evaluation = match &self.config {
            EvaluatorConfig::Single { agent } => LoopEvaluation::Single(
                self.evaluator
                    .evaluate_single(agent, &document.text, &summary.text, &summary.id)
                    .map_err(|e| e.to_string())?,
            ),
            EvaluatorConfig::Ensemble { agents, strategy } => LoopEvaluation::Aggregated(Box::new(
                self.evaluator
                    .evaluate_multi(agents, strategy, &document.text, &summary.text, &summary.id)
                    .map_err(|e| e.to_string())?,
            )),
        };
        Ok((evaluation, prompt))
    }
}

/// Wire a [`LoopConfig`] to gateway-backed stages and run one document.
pub fn run_loop_llm(
    document: &Document,
    config: &LoopConfig,
    gateway: &Gateway,
    prompts: &PromptSet,
) -> RefinementTrace {
    if let Err(e) = config.validate() {
        return RefinementTrace::errored(&document.id, Vec::new(), e.to_string());
    }
    let generator = LlmGenerator::new(gateway, prompts, config.generator.clone());
    let evaluator = LlmLoopEvaluator::new(
        gateway,
        prompts,
        config.evaluator.clone(),
        config.scale_max,
        config.dimensions.clone(),
    );
    run_loop(document, config.tau, config.t_max, &generator, &evaluator)
}
