//! Prompt templates and the structured evaluation output contract.
//!
//! The v1 templates shipped under `assets/prompts/v1/` are the method: the
//! generation, evaluation, and refinement prompts are fixed text with named
//! slots, and evaluators must answer in a Python-dict schema that
//! [`parse_evaluation_response`] reads back. A custom template directory can
//! be supplied for prompt-ablation experiments.

mod parser;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parser::{parse_evaluation_response, to_schema_string, ParseError};

/// Appended to the user message when an evaluator's first answer fails to
/// parse; a second failure is a hard error.
pub const CORRECTIVE_INSTRUCTION: &str = "Output only the dictionary, nothing else.";

/// A summary quality dimension. Order is the loop's fixed listing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Clarity,
    Accuracy,
    Coverage,
    Overall,
    Coherence,
    Fluency,
    Consistency,
    Relevance,
}

/// The four dimensions the refinement loop scores and repairs.
pub const LOOP_DIMENSIONS: [Dimension; 4] = [
    Dimension::Clarity,
    Dimension::Accuracy,
    Dimension::Coverage,
    Dimension::Overall,
];

impl Dimension {
    pub fn id(&self) -> &'static str {
        match self {
            Dimension::Clarity => "clarity",
            Dimension::Accuracy => "accuracy",
            Dimension::Coverage => "coverage",
            Dimension::Overall => "overall",
            Dimension::Coherence => "coherence",
            Dimension::Fluency => "fluency",
            Dimension::Consistency => "consistency",
            Dimension::Relevance => "relevance",
        }
    }

    /// Label used in rendered prompts and reports.
    pub fn display_name(&self) -> &'static str {
        match self {
            Dimension::Clarity => "Clarity",
            Dimension::Accuracy => "Accuracy",
            Dimension::Coverage => "Coverage",
            Dimension::Overall => "Overall quality",
            Dimension::Coherence => "Coherence",
            Dimension::Fluency => "Fluency",
            Dimension::Consistency => "Consistency",
            Dimension::Relevance => "Relevance",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clarity" => Ok(Dimension::Clarity),
            "accuracy" => Ok(Dimension::Accuracy),
            "coverage" => Ok(Dimension::Coverage),
            "overall" => Ok(Dimension::Overall),
            "coherence" => Ok(Dimension::Coherence),
            "fluency" => Ok(Dimension::Fluency),
            "consistency" => Ok(Dimension::Consistency),
            "relevance" => Ok(Dimension::Relevance),
            other => Err(format!("unknown dimension {other:?}")),
        }
    }
}

/// One agent's verdict on one dimension: a Likert score plus the rationale
/// sentence(s) the agent gave for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionEvaluation {
    pub dimension: Dimension,
    pub score: i64,
    pub rationale: String,
}

/// A full parsed evaluation from one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub summary_id: String,
    pub agent_id: String,
    pub per_dimension: BTreeMap<Dimension, DimensionEvaluation>,
    pub raw_response: String,
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("failed to load template {path}: {source}")]
    TemplateLoad {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("template {name}: {detail}")]
    InvalidTemplate { name: String, detail: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// A template parsed into literal runs and named slots. Values are spliced
/// in verbatim and never re-scanned, so documents containing slot markers
/// render literally.
#[derive(Debug, Clone)]
struct Template {
    name: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone)]
enum Segment {
    Literal(String),
    Slot(String),
}

impl Template {
    fn parse(name: &str, text: &str) -> Result<Self, PromptError> {
        let mut segments = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            let (literal, after) = rest.split_at(start);
            if !literal.is_empty() {
                segments.push(Segment::Literal(literal.to_string()));
            }
            let after = &after[2..];
            let end = after.find("}}").ok_or_else(|| PromptError::InvalidTemplate {
                name: name.to_string(),
                detail: "unterminated slot marker".into(),
            })?;
            let slot = &after[..end];
            if slot.is_empty() || !slot.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
                return Err(PromptError::InvalidTemplate {
                    name: name.to_string(),
                    detail: format!("bad slot name {slot:?}"),
                });
            }
            segments.push(Segment::Slot(slot.to_string()));
            rest = &after[end + 2..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Literal(rest.to_string()));
        }
        Ok(Self {
            name: name.to_string(),
            segments,
        })
    }

    fn require_slots(&self, slots: &[&str]) -> Result<(), PromptError> {
        for slot in slots {
            let count = self
                .segments
                .iter()
                .filter(|s| matches!(s, Segment::Slot(name) if name == slot))
                .count();
            if count != 1 {
                return Err(PromptError::InvalidTemplate {
                    name: self.name.clone(),
                    detail: format!("slot {slot:?} must appear exactly once, found {count}"),
                });
            }
        }
        Ok(())
    }

    fn render(&self, values: &BTreeMap<&str, &str>) -> Result<String, PromptError> {
        let mut out = String::new();
        for segment in &self.segments {
            match segment {
                Segment::Literal(text) => out.push_str(text),
                Segment::Slot(name) => match values.get(name.as_str()) {
                    Some(value) => out.push_str(value),
                    None => {
                        return Err(PromptError::InvalidTemplate {
                            name: self.name.clone(),
                            detail: format!("no value bound for slot {name:?}"),
                        })
                    }
                },
            }
        }
        Ok(out)
    }
}

/// One line of the refinement prompt's feedback block.
#[derive(Debug, Clone)]
pub struct FeedbackLine {
    pub dimension: Dimension,
    pub score: String,
    pub rationale: String,
}

/// The loaded template set: initial generation, evaluation, refinement, and
/// the leader meta-evaluation prompt.
#[derive(Debug, Clone)]
pub struct PromptSet {
    initial_system: Template,
    initial_user: Template,
    evaluation_system: Template,
    evaluation_user: Template,
    refinement_system: Template,
    refinement_user: Template,
    leader_system: Template,
    leader_user: Template,
}

const TEMPLATE_FILES: [&str; 8] = [
    "initial.system.txt",
    "initial.user.txt",
    "evaluation.system.txt",
    "evaluation.user.txt",
    "refinement.system.txt",
    "refinement.user.txt",
    "leader.system.txt",
    "leader.user.txt",
];

impl PromptSet {
    /// The bundled v1 templates.
    pub fn builtin() -> Self {
        Self::from_sources([
            include_str!("../../assets/prompts/v1/initial.system.txt"),
            include_str!("../../assets/prompts/v1/initial.user.txt"),
            include_str!("../../assets/prompts/v1/evaluation.system.txt"),
            include_str!("../../assets/prompts/v1/evaluation.user.txt"),
            include_str!("../../assets/prompts/v1/refinement.system.txt"),
            include_str!("../../assets/prompts/v1/refinement.user.txt"),
            include_str!("../../assets/prompts/v1/leader.system.txt"),
            include_str!("../../assets/prompts/v1/leader.user.txt"),
        ])
        .expect("bundled templates are valid")
    }

    /// Load the same eight files from a custom directory.
    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut sources = Vec::with_capacity(8);
        for file in TEMPLATE_FILES {
            let path = dir.join(file);
            let text = std::fs::read_to_string(&path).map_err(|source| PromptError::TemplateLoad {
                path: path.display().to_string(),
                source,
            })?;
            sources.push(text);
        }
        let refs: [&str; 8] = [
            &sources[0], &sources[1], &sources[2], &sources[3], &sources[4], &sources[5],
            &sources[6], &sources[7],
        ];
        Self::from_sources(refs)
    }

    fn from_sources(sources: [&str; 8]) -> Result<Self, PromptError> {
        let set = Self {
            initial_system: Template::parse(TEMPLATE_FILES[0], sources[0])?,
            initial_user: Template::parse(TEMPLATE_FILES[1], sources[1])?,
            evaluation_system: Template::parse(TEMPLATE_FILES[2], sources[2])?,
            evaluation_user: Template::parse(TEMPLATE_FILES[3], sources[3])?,
            refinement_system: Template::parse(TEMPLATE_FILES[4], sources[4])?,
            refinement_user: Template::parse(TEMPLATE_FILES[5], sources[5])?,
            leader_system: Template::parse(TEMPLATE_FILES[6], sources[6])?,
            leader_user: Template::parse(TEMPLATE_FILES[7], sources[7])?,
        };
        set.initial_user.require_slots(&["document"])?;
        set.evaluation_user.require_slots(&["document", "summary"])?;
        set.refinement_user
            .require_slots(&["document", "previous_summary", "feedback"])?;
        set.leader_user
            .require_slots(&["document", "summary", "evaluations"])?;
        Ok(set)
    }

    /// (system, user) messages asking for an initial summary.
    pub fn render_initial(&self, document: &str) -> Result<(String, String), PromptError> {
        if document.is_empty() {
            return Err(PromptError::InvalidInput("document must be non-empty".into()));
        }
        let values = BTreeMap::from([("document", document)]);
        Ok((
            self.initial_system.render(&BTreeMap::new())?,
            self.initial_user.render(&values)?,
        ))
    }

    /// (system, user) messages asking for a four-dimension evaluation.
    pub fn render_evaluation(
        &self,
        document: &str,
        summary: &str,
    ) -> Result<(String, String), PromptError> {
        if document.is_empty() || summary.is_empty() {
            return Err(PromptError::InvalidInput(
                "document and summary must be non-empty".into(),
            ));
        }
        let values = BTreeMap::from([("document", document), ("summary", summary)]);
        Ok((
            self.evaluation_system.render(&BTreeMap::new())?,
            self.evaluation_user.render(&values)?,
        ))
    }

    /// (system, user) messages asking for a refined summary given the
    /// deficiency feedback. Refinement without feedback is contradictory,
    /// so an empty line list is rejected.
    pub fn render_refinement(
        &self,
        document: &str,
        previous_summary: &str,
        feedback: &[FeedbackLine],
    ) -> Result<(String, String), PromptError> {
        if document.is_empty() || previous_summary.is_empty() {
            return Err(PromptError::InvalidInput(
                "document and previous summary must be non-empty".into(),
            ));
        }
        if feedback.is_empty() {
            return Err(PromptError::InvalidInput(
                "refinement requires at least one feedback entry".into(),
            ));
        }
        let block = format_feedback_block(feedback);
        let values = BTreeMap::from([
            ("document", document),
            ("previous_summary", previous_summary),
            ("feedback", block.as_str()),
        ]);
        Ok((
            self.refinement_system.render(&BTreeMap::new())?,
            self.refinement_user.render(&values)?,
        ))
    }

    /// (system, user) messages asking the leader to reconcile independent
    /// evaluations. Agent ids are replaced by anonymous labels.
    pub fn render_leader(
        &self,
        document: &str,
        summary: &str,
        evaluations: &[EvaluationResult],
    ) -> Result<(String, String), PromptError> {
        if document.is_empty() || summary.is_empty() {
            return Err(PromptError::InvalidInput(
                "document and summary must be non-empty".into(),
            ));
        }
        if evaluations.len() < 2 {
            return Err(PromptError::InvalidInput(
                "leader aggregation requires at least two evaluations".into(),
            ));
        }
        let block = format_evaluations_block(evaluations);
        let values = BTreeMap::from([
            ("document", document),
            ("summary", summary),
            ("evaluations", block.as_str()),
        ]);
        Ok((
            self.leader_system.render(&BTreeMap::new())?,
            self.leader_user.render(&values)?,
        ))
    }
}

fn format_feedback_block(lines: &[FeedbackLine]) -> String {
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!(
            "- {} [Score: {}]: {}",
            line.dimension.display_name(),
            line.score,
            line.rationale
        ));
    }
    out
}

fn format_evaluations_block(evaluations: &[EvaluationResult]) -> String {
    let mut out = String::new();
    for (i, evaluation) in evaluations.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("Evaluator {}", i + 1));
        for entry in evaluation.per_dimension.values() {
            out.push_str(&format!(
                "\n- {} [Score: {}]: {}",
                entry.dimension.display_name(),
                entry.score,
                entry.rationale
            ));
        }
    }
    out
}
