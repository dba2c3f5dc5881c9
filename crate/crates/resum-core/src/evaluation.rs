//! Single-agent evaluation and multi-agent aggregation.
//!
//! Three aggregation strategies are supported: arithmetic averaging
//! (continuous scores, kept as exact rationals), majority voting (mode,
//! falling back to the lower median on ties), and leader-based
//! meta-evaluation, where an extra agent reads all evaluations and produces
//! the final verdict.

use std::collections::BTreeMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{AgentSpec, ChatRequest, Gateway, GatewayError};
use crate::prompts::{
    parse_evaluation_response, Dimension, EvaluationResult, ParseError, PromptError, PromptSet,
    CORRECTIVE_INSTRUCTION, LOOP_DIMENSIONS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregationStrategy {
    Averaging,
    MajorityVoting,
    LeaderBased { leader: AgentSpec },
}

impl AggregationStrategy {
    pub fn kind(&self) -> &'static str {
        match self {
            AggregationStrategy::Averaging => "averaging",
            AggregationStrategy::MajorityVoting => "majority_voting",
            AggregationStrategy::LeaderBased { .. } => "leader_based",
        }
    }
}

/// The outcome of a multi-agent evaluation: the combined per-dimension
/// scores plus every contributing evaluation for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedEvaluation {
    pub summary_id: String,
    pub strategy: AggregationStrategy,
    pub per_dimension: BTreeMap<Dimension, Rational64>,
    pub contributing: Vec<EvaluationResult>,
    /// The leader's own parsed evaluation (leader-based strategy only).
    pub leader_evaluation: Option<EvaluationResult>,
    pub leader_rationale: Option<String>,
}

impl AggregatedEvaluation {
    /// Rationale text for one dimension: the leader's explanation when a
    /// leader produced the verdict, otherwise the contributing agents'
    /// rationales joined under anonymous labels.
    pub fn rationale_for(&self, dimension: Dimension) -> String {
        if let Some(leader) = &self.leader_evaluation {
            if let Some(entry) = leader.per_dimension.get(&dimension) {
                return entry.rationale.clone();
            }
        }
        self.contributing
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                e.per_dimension
                    .get(&dimension)
                    .map(|entry| format!("Evaluator {}: {}", i + 1, entry.rationale))
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("agent {agent_id} evaluation failed after corrective retry ({source}); raw response: {raw:?}")]
    EvaluationFailed {
        agent_id: String,
        raw: String,
        source: ParseError,
    },
    #[error("evaluations cover different dimension sets")]
    DimensionMismatch,
    #[error("no evaluations to aggregate")]
    Empty,
    #[error("leader aggregation requires at least two evaluations")]
    TooFew,
    #[error("agent failure(s) during multi-agent evaluation: {}", summarize_failures(.failed))]
    PartialFailure { failed: Vec<(String, String)> },
}

fn summarize_failures(failed: &[(String, String)]) -> String {
    failed
        .iter()
        .map(|(id, msg)| format!("{id}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

fn check_same_dimensions(evals: &[EvaluationResult]) -> Result<(), EvalError> {
    if evals.is_empty() {
        return Err(EvalError::Empty);
    }
    let first: Vec<Dimension> = evals[0].per_dimension.keys().copied().collect();
    for eval in &evals[1..] {
        let dims: Vec<Dimension> = eval.per_dimension.keys().copied().collect();
        if dims != first {
            return Err(EvalError::DimensionMismatch);
        }
    }
    Ok(())
}

/// Per-dimension arithmetic mean as an exact rational; no rounding happens
/// until display time.
pub fn aggregate_average(
    evals: &[EvaluationResult],
) -> Result<BTreeMap<Dimension, Rational64>, EvalError> {
    check_same_dimensions(evals)?;
    let count = evals.len() as i64;
    let mut out = BTreeMap::new();
    for &dimension in evals[0].per_dimension.keys() {
        let sum: i64 = evals
            .iter()
            .map(|e| e.per_dimension[&dimension].score)
            .sum();
        out.insert(dimension, Rational64::new(sum, count));
    }
    Ok(out)
}

/// The most frequent score; when no score is strictly most frequent (a
/// three-way split with three agents, or tied modes in larger ensembles),
/// the lower median. Always one of the input scores. `None` on empty input.
pub fn majority_vote(scores: &[i64]) -> Option<i64> {
    if scores.is_empty() {
        None
    } else {
        Some(majority_of(scores))
    }
}

fn majority_of(scores: &[i64]) -> i64 {
    let mut sorted: Vec<i64> = scores.to_vec();
    sorted.sort_unstable();
    let mut best_value = sorted[0];
    let mut best_count = 0usize;
    let mut unique = true;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let count = j - i;
        if count > best_count {
            best_count = count;
            best_value = sorted[i];
            unique = true;
        } else if count == best_count {
            unique = false;
        }
        i = j;
    }
    if unique {
        best_value
    } else {
        sorted[(sorted.len() - 1) / 2] // lower median
    }
}

/// Per-dimension majority vote.
pub fn aggregate_majority(
    evals: &[EvaluationResult],
) -> Result<BTreeMap<Dimension, i64>, EvalError> {
    check_same_dimensions(evals)?;
    let mut out = BTreeMap::new();
    for &dimension in evals[0].per_dimension.keys() {
        let scores: Vec<i64> = evals
            .iter()
            .map(|e| e.per_dimension[&dimension].score)
            .collect();
        out.insert(dimension, majority_of(&scores));
    }
    Ok(out)
}

/// LLM evaluation runner: renders the evaluation prompt, calls agents
/// through the gateway, parses the dict contract with one corrective retry.
pub struct Evaluator<'a> {
    gateway: &'a Gateway,
    prompts: &'a PromptSet,
    scale_max: i64,
    dimensions: Vec<Dimension>,
}

impl<'a> Evaluator<'a> {
    pub fn new(gateway: &'a Gateway, prompts: &'a PromptSet) -> Self {
        Self {
            gateway,
            prompts,
            scale_max: 5,
            dimensions: LOOP_DIMENSIONS.to_vec(),
        }
    }

    pub fn with_scale_max(mut self, scale_max: i64) -> Self {
        self.scale_max = scale_max;
        self
    }

    pub fn with_dimensions(mut self, dimensions: Vec<Dimension>) -> Self {
        self.dimensions = dimensions;
        self
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn scale_max(&self) -> i64 {
        self.scale_max
    }

    /// The rendered evaluation prompt, for audit logs.
    pub fn evaluation_prompt(
        &self,
        document: &str,
        summary: &str,
    ) -> Result<(String, String), PromptError> {
        self.prompts.render_evaluation(document, summary)
    }

    fn complete_and_parse(
        &self,
        agent: &AgentSpec,
        system: &str,
        user: &str,
        summary_id: &str,
    ) -> Result<EvaluationResult, EvalError> {
        let first = self
            .gateway
            .complete(&ChatRequest::new(agent, system, user))?;
        match parse_evaluation_response(&first.text, self.scale_max, &self.dimensions) {
            Ok(per_dimension) => Ok(EvaluationResult {
                summary_id: summary_id.to_string(),
                agent_id: agent.agent_id.clone(),
                per_dimension,
                raw_response: first.text,
            }),
            Err(_) => {
                let corrective = format!("{user}\n\n{CORRECTIVE_INSTRUCTION}");
                let second = self
                    .gateway
                    .complete(&ChatRequest::new(agent, system, &corrective))?;
                match parse_evaluation_response(&second.text, self.scale_max, &self.dimensions) {
                    Ok(per_dimension) => Ok(EvaluationResult {
                        summary_id: summary_id.to_string(),
                        agent_id: agent.agent_id.clone(),
                        per_dimension,
                        raw_response: second.text,
                    }),
                    Err(source) => Err(EvalError::EvaluationFailed {
                        agent_id: agent.agent_id.clone(),
                        raw: second.text,
                        source,
                    }),
                }
            }
        }
    }

    /// One agent scores one summary against its document.
    pub fn evaluate_single(
        &self,
        agent: &AgentSpec,
        document: &str,
        summary: &str,
        summary_id: &str,
    ) -> Result<EvaluationResult, EvalError> {
        let (system, user) = self.prompts.render_evaluation(document, summary)?;
        self.complete_and_parse(agent, &system, &user, summary_id)
    }

    /// The leader reads all evaluations plus the document and summary and
    /// produces the final integer verdict.
    pub fn aggregate_leader(
        &self,
        evals: &[EvaluationResult],
        leader: &AgentSpec,
        document: &str,
        summary: &str,
        summary_id: &str,
    ) -> Result<AggregatedEvaluation, EvalError> {
        if evals.len() < 2 {
            return Err(EvalError::TooFew);
        }
        check_same_dimensions(evals)?;
        let (system, user) = self.prompts.render_leader(document, summary, evals)?;
        let leader_eval = self.complete_and_parse(leader, &system, &user, summary_id)?;
        let per_dimension = leader_eval
            .per_dimension
            .iter()
            .map(|(&d, e)| (d, Rational64::from_integer(e.score)))
            .collect();
        let leader_rationale = Some(
            leader_eval
                .per_dimension
                .values()
                .map(|e| format!("{}: {}", e.dimension.id(), e.rationale))
                .collect::<Vec<_>>()
                .join("; "),
        );
        Ok(AggregatedEvaluation {
            summary_id: summary_id.to_string(),
            strategy: AggregationStrategy::LeaderBased {
                leader: leader.clone(),
            },
            per_dimension,
            contributing: evals.to_vec(),
            leader_evaluation: Some(leader_eval),
            leader_rationale,
        })
    }

    /// Fan out to every agent (concurrently), then aggregate. Any agent's
    /// hard failure aborts the whole ensemble; evaluating a shrunken
    /// ensemble would silently change the method mid-run.
    pub fn evaluate_multi(
        &self,
        agents: &[AgentSpec],
        strategy: &AggregationStrategy,
        document: &str,
        summary: &str,
        summary_id: &str,
    ) -> Result<AggregatedEvaluation, EvalError> {
        if agents.is_empty() {
            return Err(EvalError::Empty);
        }
        if matches!(strategy, AggregationStrategy::LeaderBased { .. }) && agents.len() < 2 {
            return Err(EvalError::TooFew);
        }

        let results: Vec<Result<EvaluationResult, EvalError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = agents
                .iter()
                .map(|agent| {
                    scope.spawn(move || self.evaluate_single(agent, document, summary, summary_id))
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });

        let mut evals = Vec::with_capacity(results.len());
        let mut failed = Vec::new();
        for (agent, result) in agents.iter().zip(results) {
            match result {
                Ok(eval) => evals.push(eval),
                Err(e) => failed.push((agent.agent_id.clone(), e.to_string())),
            }
        }
        if !failed.is_empty() {
            return Err(EvalError::PartialFailure { failed });
        }

        match strategy {
            AggregationStrategy::Averaging => Ok(AggregatedEvaluation {
                summary_id: summary_id.to_string(),
                strategy: strategy.clone(),
                per_dimension: aggregate_average(&evals)?,
                contributing: evals,
                leader_evaluation: None,
                leader_rationale: None,
            }),
            AggregationStrategy::MajorityVoting => {
                let majority = aggregate_majority(&evals)?;
                Ok(AggregatedEvaluation {
                    summary_id: summary_id.to_string(),
                    strategy: strategy.clone(),
                    per_dimension: majority
                        .into_iter()
                        .map(|(d, s)| (d, Rational64::from_integer(s)))
                        .collect(),
                    contributing: evals,
                    leader_evaluation: None,
                    leader_rationale: None,
                })
            }
            AggregationStrategy::LeaderBased { leader } => {
                self.aggregate_leader(&evals, leader, document, summary, summary_id)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::DimensionEvaluation;

    fn eval_with(scores: [i64; 4]) -> EvaluationResult {
        let per_dimension = LOOP_DIMENSIONS
            .iter()
            .zip(scores)
            .map(|(&dimension, score)| {
                (
                    dimension,
                    DimensionEvaluation {
                        dimension,
                        score,
                        rationale: "r".into(),
                    },
                )
            })
            .collect();
        EvaluationResult {
            summary_id: "s".into(),
            agent_id: "a".into(),
            per_dimension,
            raw_response: String::new(),
        }
    }

    fn clarity_scores(scores: &[i64]) -> i64 {
        let evals: Vec<EvaluationResult> = scores
            .iter()
            .map(|&s| eval_with([s, 5, 5, 5]))
            .collect();
        aggregate_majority(&evals).unwrap()[&Dimension::Clarity]
    }

    #[test]
    fn average_is_exact_rational() {
        let evals = [eval_with([4, 4, 4, 4]), eval_with([4, 4, 4, 4]), eval_with([5, 4, 4, 4])];
        let means = aggregate_average(&evals).unwrap();
        assert_eq!(means[&Dimension::Clarity], Rational64::new(13, 3));
        assert_eq!(means[&Dimension::Accuracy], Rational64::from_integer(4));
    }

    #[test]
    fn average_of_single_evaluation_is_identity() {
        let evals = [eval_with([3, 4, 5, 2])];
        let means = aggregate_average(&evals).unwrap();
        assert_eq!(means[&Dimension::Overall], Rational64::from_integer(2));
    }

    #[test]
    fn majority_mode_and_median() {
        assert_eq!(clarity_scores(&[4, 4, 5]), 4); // unique mode
        assert_eq!(clarity_scores(&[3, 4, 5]), 4); // three-way split -> median
        assert_eq!(clarity_scores(&[5, 5, 5]), 5); // unanimity
        assert_eq!(clarity_scores(&[1, 1, 3, 3]), 1); // tied modes -> lower median
        assert_eq!(clarity_scores(&[2, 2, 4, 4, 5]), 4); // tied modes, odd count -> median
    }

    #[test]
    fn majority_is_permutation_invariant() {
        assert_eq!(clarity_scores(&[3, 4, 5]), clarity_scores(&[5, 3, 4]));
        assert_eq!(clarity_scores(&[4, 4, 5]), clarity_scores(&[5, 4, 4]));
    }

    #[test]
    fn mismatched_dimension_sets_are_rejected() {
        let full = eval_with([4, 4, 4, 4]);
        let mut partial = eval_with([4, 4, 4, 4]);
        partial.per_dimension.remove(&Dimension::Overall);
        assert!(matches!(
            aggregate_average(&[full, partial]),
            Err(EvalError::DimensionMismatch)
        ));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(aggregate_average(&[]), Err(EvalError::Empty)));
        assert!(matches!(aggregate_majority(&[]), Err(EvalError::Empty)));
    }
}
