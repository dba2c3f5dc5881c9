//! Self-reflective summarization with LLM-based evaluation.
//!
//! The crate wires together the pieces:
//!
//! - [`text_metrics`]: native lexical and readability metrics (ROUGE-1/2/L,
//!   BLEU, chrF, a stem-based METEOR variant, Flesch Reading Ease,
//!   Dale-Chall), plus ingestion of precomputed scores from external scorers.
//! - [`gateway`]: a chat-completions client with deterministic sampling,
//!   content-addressed disk caching, retries, and per-agent rate limiting.
//! - [`prompts`]: the versioned prompt templates for generation, evaluation,
//!   refinement, and leader-based meta-evaluation, and the parser for the
//!   structured evaluation output contract.
//! - [`evaluation`]: single-agent scoring and the three multi-agent
//!   aggregation strategies (averaging, majority voting, leader-based).
//! - [`refine`]: the evaluate/feedback/refine loop with convergence
//!   threshold and best-summary fallback.
//! - [`meta_eval`]: Kendall τ-b against human judgments (macro and micro),
//!   Krippendorff's α, and report rendering.
//!
//! The `resum` binary exposes all of it on the command line; see the README.

pub mod cli;
pub mod config;
pub mod evaluation;
pub mod gateway;
pub mod meta_eval;
pub mod prompts;
pub mod refine;
pub mod rng;
pub mod text_metrics;

pub use evaluation::{AggregatedEvaluation, AggregationStrategy, EvalError};
pub use gateway::{AgentSpec, ChatRequest, ChatResponse, Gateway, GatewayError};
pub use meta_eval::{CorrelationMode, CorrelationResult, EvalDataset, HumanAnnotation};
pub use prompts::{Dimension, DimensionEvaluation, EvaluationResult, PromptSet};
pub use refine::{Document, Feedback, LoopConfig, RefinementTrace, SummaryRecord, Termination};
pub use text_metrics::{MetricScore, OverlapScore, TokenSequence};
