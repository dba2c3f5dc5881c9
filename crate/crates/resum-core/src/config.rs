//! Run configuration: the agent roster plus loop and pipeline settings,
//! loaded from a TOML file. Every key can be overridden by a CLI flag;
//! flags win over environment variables, which win over the file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::evaluation::AggregationStrategy;
use crate::gateway::AgentSpec;
use crate::prompts::{Dimension, LOOP_DIMENSIONS};
use crate::refine::{EvaluatorConfig, LoopConfig};
use crate::text_metrics::RougeScalar;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("config references unknown agent id {0:?}")]
    UnknownAgent(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Single,
    Averaging,
    MajorityVoting,
    LeaderBased,
}

impl StrategyKind {
    pub fn parse(label: &str) -> Result<Self, ConfigError> {
        match label {
            "single" => Ok(StrategyKind::Single),
            "averaging" => Ok(StrategyKind::Averaging),
            "majority_voting" | "majority-voting" | "majority" => Ok(StrategyKind::MajorityVoting),
            "leader_based" | "leader-based" | "leader" => Ok(StrategyKind::LeaderBased),
            other => Err(ConfigError::Invalid(format!(
                "unknown strategy {other:?} (expected single, averaging, majority_voting, or leader_based)"
            ))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: String,
    model: String,
    endpoint: String,
    #[serde(default)]
    api_key_env: Option<String>,
    #[serde(default)]
    temperature: Option<f64>,
    #[serde(default)]
    max_output_tokens: Option<u32>,
    #[serde(default)]
    timeout_s: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    agents: Vec<RawAgent>,
    #[serde(default)]
    generator: Option<String>,
    #[serde(default)]
    evaluators: Vec<String>,
    #[serde(default)]
    leader: Option<String>,
    #[serde(default)]
    strategy: Option<String>,
    #[serde(default)]
    tau: Option<i64>,
    #[serde(default)]
    t_max: Option<u32>,
    #[serde(default)]
    scale_max: Option<i64>,
    #[serde(default)]
    parallelism: Option<usize>,
    #[serde(default)]
    dimensions: Option<Vec<String>>,
    #[serde(default)]
    cache_dir: Option<PathBuf>,
    #[serde(default)]
    prompt_dir: Option<PathBuf>,
    #[serde(default)]
    dale_chall_path: Option<PathBuf>,
    #[serde(default)]
    rouge_scalar: Option<String>,
}

/// Resolved pipeline configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub agents: Vec<AgentSpec>,
    pub generator_id: Option<String>,
    pub evaluator_ids: Vec<String>,
    pub leader_id: Option<String>,
    pub strategy: StrategyKind,
    pub tau: i64,
    pub t_max: u32,
    pub scale_max: i64,
    pub parallelism: usize,
    pub dimensions: Vec<Dimension>,
    pub cache_dir: Option<PathBuf>,
    pub prompt_dir: Option<PathBuf>,
    pub dale_chall_path: Option<PathBuf>,
    pub rouge_scalar: RougeScalar,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            agents: Vec::new(),
            generator_id: None,
            evaluator_ids: Vec::new(),
            leader_id: None,
            strategy: StrategyKind::Single,
            tau: 4,
            t_max: 3,
            scale_max: 5,
            parallelism: 1,
            dimensions: LOOP_DIMENSIONS.to_vec(),
            cache_dir: None,
            prompt_dir: None,
            dale_chall_path: None,
            rouge_scalar: RougeScalar::Recall,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&raw)
    }

    pub fn from_toml_str(raw: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let mut config = RunConfig::default();

        for agent in raw.agents {
            let mut spec = AgentSpec::new(agent.id, agent.model, agent.endpoint);
            spec.api_key_env = agent.api_key_env;
            if let Some(t) = agent.temperature {
                spec.temperature = t;
            }
            if let Some(m) = agent.max_output_tokens {
                spec.max_output_tokens = m;
            }
            if let Some(s) = agent.timeout_s {
                spec.timeout_s = s;
            }
            config.agents.push(spec);
        }
        {
            let mut ids: Vec<&str> = config.agents.iter().map(|a| a.agent_id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != config.agents.len() {
                return Err(ConfigError::Invalid("duplicate agent id".into()));
            }
        }

        config.generator_id = raw.generator;
        config.evaluator_ids = raw.evaluators;
        config.leader_id = raw.leader;
        if let Some(label) = raw.strategy {
            config.strategy = StrategyKind::parse(&label)?;
        } else if config.evaluator_ids.len() > 1 {
            config.strategy = StrategyKind::Averaging;
        }
        if let Some(tau) = raw.tau {
            config.tau = tau;
        }
        if let Some(t_max) = raw.t_max {
            config.t_max = t_max;
        }
        if let Some(scale_max) = raw.scale_max {
            config.scale_max = scale_max;
        }
        if let Some(parallelism) = raw.parallelism {
            config.parallelism = parallelism.max(1);
        }
        if let Some(labels) = raw.dimensions {
            let mut dimensions = Vec::with_capacity(labels.len());
            for label in labels {
                dimensions.push(
                    label
                        .parse::<Dimension>()
                        .map_err(ConfigError::Invalid)?,
                );
            }
            if dimensions.is_empty() {
                return Err(ConfigError::Invalid("dimensions must be non-empty".into()));
            }
            config.dimensions = dimensions;
        }
        config.cache_dir = raw.cache_dir;
        config.prompt_dir = raw.prompt_dir;
        config.dale_chall_path = raw.dale_chall_path;
        if let Some(label) = raw.rouge_scalar {
            config.rouge_scalar = match label.as_str() {
                "recall" => RougeScalar::Recall,
                "f1" => RougeScalar::F1,
                other => {
                    return Err(ConfigError::Invalid(format!(
                        "unknown rouge_scalar {other:?} (expected recall or f1)"
                    )))
                }
            };
        }
        config.validate()?;
        Ok(config)
    }

    /// Check that every referenced agent id resolves.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(id) = &self.generator_id {
            self.agent(id)?;
        }
        for id in &self.evaluator_ids {
            self.agent(id)?;
        }
        if let Some(id) = &self.leader_id {
            self.agent(id)?;
        }
        Ok(())
    }

    pub fn agent(&self, id: &str) -> Result<&AgentSpec, ConfigError> {
        self.agents
            .iter()
            .find(|a| a.agent_id == id)
            .ok_or_else(|| ConfigError::UnknownAgent(id.to_string()))
    }

    fn evaluator_specs(&self) -> Result<Vec<AgentSpec>, ConfigError> {
        if self.evaluator_ids.is_empty() {
            return Err(ConfigError::Invalid(
                "no evaluators configured (set `evaluators` or --evaluators)".into(),
            ));
        }
        self.evaluator_ids
            .iter()
            .map(|id| self.agent(id).cloned())
            .collect()
    }

    /// The evaluator side (single agent or ensemble) per the strategy.
    pub fn evaluator_config(&self) -> Result<EvaluatorConfig, ConfigError> {
        let evaluators = self.evaluator_specs()?;
        match self.strategy {
            StrategyKind::Single => {
                if evaluators.len() != 1 {
                    return Err(ConfigError::Invalid(format!(
                        "strategy `single` requires exactly one evaluator, got {}",
                        evaluators.len()
                    )));
                }
                Ok(EvaluatorConfig::Single {
                    agent: evaluators.into_iter().next().expect("checked length"),
                })
            }
            StrategyKind::Averaging => Ok(EvaluatorConfig::Ensemble {
                agents: evaluators,
                strategy: AggregationStrategy::Averaging,
            }),
            StrategyKind::MajorityVoting => Ok(EvaluatorConfig::Ensemble {
                agents: evaluators,
                strategy: AggregationStrategy::MajorityVoting,
            }),
            StrategyKind::LeaderBased => {
                let leader_id = self.leader_id.as_ref().ok_or_else(|| {
                    ConfigError::Invalid("leader_based strategy requires `leader`".into())
                })?;
                Ok(EvaluatorConfig::Ensemble {
                    agents: evaluators,
                    strategy: AggregationStrategy::LeaderBased {
                        leader: self.agent(leader_id)?.clone(),
                    },
                })
            }
        }
    }

    /// Assemble the loop configuration for `resum run`.
    pub fn loop_config(&self) -> Result<LoopConfig, ConfigError> {
        let generator_id = self.generator_id.as_ref().ok_or_else(|| {
            ConfigError::Invalid("no generator configured (set `generator` or --generator)".into())
        })?;
        let config = LoopConfig {
            tau: self.tau,
            t_max: self.t_max,
            scale_max: self.scale_max,
            generator: self.agent(generator_id)?.clone(),
            evaluator: self.evaluator_config()?,
            dimensions: self.dimensions.clone(),
        };
        config
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
tau = 4
t_max = 3
parallelism = 2
strategy = "majority_voting"
generator = "llama"
evaluators = ["llama", "linkbricks", "qwen"]
leader = "phi4"

[[agents]]
id = "llama"
model = "meta-llama/Meta-Llama-3.1-8B-Instruct"
endpoint = "http://localhost:8001/v1"

[[agents]]
id = "linkbricks"
model = "Saxo/Linkbricks-Horizon-AI-Avengers-V6-32B"
endpoint = "http://localhost:8002/v1"

[[agents]]
id = "qwen"
model = "Qwen/Qwen2-7B-Instruct"
endpoint = "http://localhost:8003/v1"

[[agents]]
id = "phi4"
model = "microsoft/phi-4"
endpoint = "http://localhost:8004/v1"
api_key_env = "PHI4_API_KEY"
"#;

    #[test]
    fn parses_the_example_roster() {
        let config = RunConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(config.agents.len(), 4);
        assert_eq!(config.strategy, StrategyKind::MajorityVoting);
        assert_eq!(config.parallelism, 2);
        let loop_config = config.loop_config().unwrap();
        assert_eq!(loop_config.generator.agent_id, "llama");
        match loop_config.evaluator {
            EvaluatorConfig::Ensemble { agents, .. } => assert_eq!(agents.len(), 3),
            other => panic!("expected ensemble, got {other:?}"),
        }
    }

    #[test]
    fn default_temperature_is_deterministic_sampling() {
        let config = RunConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(config.agents[0].temperature, 1e-10);
    }

    #[test]
    fn unknown_agent_reference_fails() {
        let bad = EXAMPLE.replace("generator = \"llama\"", "generator = \"missing\"");
        assert!(matches!(
            RunConfig::from_toml_str(&bad),
            Err(ConfigError::UnknownAgent(id)) if id == "missing"
        ));
    }

    #[test]
    fn leader_strategy_requires_leader() {
        let bad = EXAMPLE
            .replace("strategy = \"majority_voting\"", "strategy = \"leader_based\"")
            .replace("leader = \"phi4\"\n", "");
        let config = RunConfig::from_toml_str(&bad).unwrap();
        assert!(config.evaluator_config().is_err());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let bad = format!("{EXAMPLE}\nmystery_knob = 3\n");
        assert!(matches!(
            RunConfig::from_toml_str(&bad),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn single_strategy_needs_exactly_one_evaluator() {
        let bad = EXAMPLE.replace("strategy = \"majority_voting\"", "strategy = \"single\"");
        let config = RunConfig::from_toml_str(&bad).unwrap();
        assert!(matches!(
            config.evaluator_config(),
            Err(ConfigError::Invalid(_))
        ));
    }
}
