//! Uniform client for chat-completion endpoints.
//!
//! Every agent in the pipeline (generators, evaluators, the leader) goes
//! through [`Gateway::complete`]: deterministic sampling via near-zero
//! temperature, content-addressed response caching on disk, bounded retries
//! with exponential backoff, and a per-agent ceiling on concurrent in-flight
//! requests. With a warm cache the whole pipeline replays offline and
//! byte-identically.

mod cache;
mod client;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::DiskCache;
pub use client::{Gateway, GatewayConfig, RetryPolicy};

/// Near-zero temperature for deterministic sampling.
pub const DEFAULT_TEMPERATURE: f64 = 1e-10;

/// One configured model endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub model_name: String,
    pub endpoint_url: String,
    /// Name of the environment variable holding the API key, if any.
    /// The key itself never appears in configuration or cache files.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: u64,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_timeout_s() -> u64 {
    120
}

impl AgentSpec {
    pub fn new(
        agent_id: impl Into<String>,
        model_name: impl Into<String>,
        endpoint_url: impl Into<String>,
    ) -> Self {
        Self {
            agent_id: agent_id.into(),
            model_name: model_name.into(),
            endpoint_url: endpoint_url.into(),
            api_key_env: None,
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: default_max_output_tokens(),
            timeout_s: default_timeout_s(),
        }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub agent: AgentSpec,
    pub system_message: String,
    pub user_message: String,
}

impl ChatRequest {
    pub fn new(agent: &AgentSpec, system_message: impl Into<String>, user_message: impl Into<String>) -> Self {
        Self {
            agent: agent.clone(),
            system_message: system_message.into(),
            user_message: user_message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cached: bool,
    pub latency_ms: u64,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned status {status}: {body_excerpt}")]
    Provider { status: u16, body_excerpt: String },
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("cache error at {path}: {message}")]
    Cache { path: String, message: String },
}

/// The fields a response is keyed on. Endpoint URL and API key are
/// deliberately excluded: the same logical request served from a different
/// host must hit the same cache entry.
#[derive(Serialize)]
struct CacheKeyFields<'a> {
    model_name: &'a str,
    temperature: f64,
    max_output_tokens: u32,
    system_message: &'a str,
    user_message: &'a str,
}

/// Collision-resistant digest identifying one logical request.
pub fn cache_key(request: &ChatRequest) -> String {
    let fields = CacheKeyFields {
        model_name: &request.agent.model_name,
        temperature: request.agent.temperature,
        max_output_tokens: request.agent.max_output_tokens,
        system_message: &request.system_message,
        user_message: &request.user_message,
    };
    let canonical = serde_json::to_string(&fields).expect("key fields always serialize");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}
