//! The wire client: chat-completions POST with retries, temperature
//! fallback, and a per-agent in-flight ceiling.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{cache_key, ChatRequest, ChatResponse, DiskCache, GatewayError};
use crate::gateway::cache::CachedResponse;

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    /// One entry per retry; a request is attempted at most
    /// `backoff.len() + 1` times.
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            backoff: vec![
                Duration::from_secs(1),
                Duration::from_secs(2),
                Duration::from_secs(4),
            ],
        }
    }
}

impl RetryPolicy {
    /// Same retry count as the default policy but without sleeping.
    /// Intended for tests against local mock servers.
    pub fn no_backoff(retries: usize) -> Self {
        Self {
            backoff: vec![Duration::ZERO; retries],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub cache_dir: PathBuf,
    pub retry: RetryPolicy,
    /// Ceiling on concurrent in-flight requests per agent.
    pub max_in_flight_per_agent: usize,
}

impl GatewayConfig {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            cache_dir: cache_dir.into(),
            retry: RetryPolicy::default(),
            max_in_flight_per_agent: 4,
        }
    }
}

#[derive(Default)]
struct LimiterState {
    in_flight: usize,
    peak: usize,
}

struct AgentLimiter {
    ceiling: usize,
    state: Mutex<LimiterState>,
    cond: Condvar,
}

impl AgentLimiter {
    fn new(ceiling: usize) -> Self {
        Self {
            ceiling: ceiling.max(1),
            state: Mutex::new(LimiterState::default()),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut state = self.state.lock().unwrap();
        while state.in_flight >= self.ceiling {
            state = self.cond.wait(state).unwrap();
        }
        state.in_flight += 1;
        state.peak = state.peak.max(state.in_flight);
    }

    fn release(&self) {
        let mut state = self.state.lock().unwrap();
        state.in_flight -= 1;
        drop(state);
        self.cond.notify_one();
    }

    fn peak(&self) -> usize {
        self.state.lock().unwrap().peak
    }
}

struct InFlightGuard<'a>(&'a AgentLimiter);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        self.0.release();
    }
}

/// Shared, thread-safe client. Values returned are plain data; the cache
/// serializes writes per key via write-then-rename.
pub struct Gateway {
    cache: DiskCache,
    retry: RetryPolicy,
    max_in_flight: usize,
    limiters: Mutex<HashMap<String, Arc<AgentLimiter>>>,
}

impl Gateway {
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        Ok(Self {
            cache: DiskCache::new(config.cache_dir)?,
            retry: config.retry,
            max_in_flight: config.max_in_flight_per_agent,
            limiters: Mutex::new(HashMap::new()),
        })
    }

    pub fn cache(&self) -> &DiskCache {
        &self.cache
    }

    /// Highest number of simultaneously in-flight requests observed for an
    /// agent since the gateway was built. Zero for agents never used.
    pub fn peak_in_flight(&self, agent_id: &str) -> usize {
        self.limiters
            .lock()
            .unwrap()
            .get(agent_id)
            .map_or(0, |l| l.peak())
    }

    fn limiter(&self, agent_id: &str) -> Arc<AgentLimiter> {
        let mut limiters = self.limiters.lock().unwrap();
        limiters
            .entry(agent_id.to_string())
            .or_insert_with(|| Arc::new(AgentLimiter::new(self.max_in_flight)))
            .clone()
    }

    /// Complete a chat request, serving from cache when possible.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if request.user_message.is_empty() {
            return Err(GatewayError::InvalidRequest(
                "user_message must be non-empty".into(),
            ));
        }
        if request.agent.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(
                "temperature must be non-negative".into(),
            ));
        }

        let key = cache_key(request);
        if let Some(hit) = self.cache.load(&key)? {
            return Ok(ChatResponse {
                text: hit.text,
                prompt_tokens: hit.prompt_tokens,
                completion_tokens: hit.completion_tokens,
                cached: true,
                latency_ms: 0,
            });
        }

        let limiter = self.limiter(&request.agent.agent_id);
        limiter.acquire();
        let _guard = InFlightGuard(&limiter);

        let started = Instant::now();
        let wire = self.send_with_retries(request)?;
        let latency_ms = started.elapsed().as_millis() as u64;

        if wire.text.is_empty() {
            return Err(GatewayError::EmptyCompletion);
        }

        self.cache.store(
            &key,
            request,
            CachedResponse {
                text: wire.text.clone(),
                prompt_tokens: wire.prompt_tokens,
                completion_tokens: wire.completion_tokens,
            },
        )?;

        Ok(ChatResponse {
            text: wire.text,
            prompt_tokens: wire.prompt_tokens,
            completion_tokens: wire.completion_tokens,
            cached: false,
            latency_ms,
        })
    }

    fn send_with_retries(&self, request: &ChatRequest) -> Result<WireCompletion, GatewayError> {
        let mut temperature = request.agent.temperature;
        let mut temperature_retried = false;
        let mut retries_used = 0usize;
        loop {
            match send_once(request, temperature) {
                Ok(SendOutcome::Success(completion)) => return Ok(completion),
                Ok(SendOutcome::Status { status, body }) => {
                    // some providers reject temperatures below their minimum;
                    // fall back to exact zero once
                    if status == 400
                        && !temperature_retried
                        && body.to_lowercase().contains("temperature")
                    {
                        temperature_retried = true;
                        temperature = 0.0;
                        continue;
                    }
                    let transient = status == 429 || status >= 500;
                    if transient && retries_used < self.retry.backoff.len() {
                        std::thread::sleep(self.retry.backoff[retries_used]);
                        retries_used += 1;
                        continue;
                    }
                    return Err(GatewayError::Provider {
                        status,
                        body_excerpt: excerpt(&body),
                    });
                }
                Err(message) => {
                    if retries_used < self.retry.backoff.len() {
                        std::thread::sleep(self.retry.backoff[retries_used]);
                        retries_used += 1;
                        continue;
                    }
                    return Err(GatewayError::Transport {
                        attempts: retries_used as u32 + 1,
                        message,
                    });
                }
            }
        }
    }
}

struct WireCompletion {
    text: String,
    prompt_tokens: u64,
    completion_tokens: u64,
}

enum SendOutcome {
    Success(WireCompletion),
    Status { status: u16, body: String },
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChatResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize, Default)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn excerpt(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.chars().count() <= LIMIT {
        body.to_string()
    } else {
        let cut: String = body.chars().take(LIMIT).collect();
        format!("{cut}…")
    }
}

fn completions_url(endpoint_url: &str) -> String {
    format!("{}/chat/completions", endpoint_url.trim_end_matches('/'))
}

fn send_once(request: &ChatRequest, temperature: f64) -> Result<SendOutcome, String> {
    let config = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(request.agent.timeout()))
        .build();
    let agent = ureq::Agent::new_with_config(config);

    let mut messages = Vec::with_capacity(2);
    if !request.system_message.is_empty() {
        messages.push(WireMessage {
            role: "system",
            content: &request.system_message,
        });
    }
    messages.push(WireMessage {
        role: "user",
        content: &request.user_message,
    });
    let body = WireRequest {
        model: &request.agent.model_name,
        messages,
        temperature,
        max_tokens: request.agent.max_output_tokens,
    };

    let mut builder = agent
        .post(completions_url(&request.agent.endpoint_url))
        .header("content-type", "application/json");
    if let Some(env_name) = &request.agent.api_key_env {
        if let Ok(key) = std::env::var(env_name) {
            if !key.is_empty() {
                builder = builder.header("authorization", format!("Bearer {key}"));
            }
        }
    }

    let mut response = builder.send_json(&body).map_err(|e| e.to_string())?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| e.to_string())?;

    if !(200..300).contains(&status) {
        return Ok(SendOutcome::Status { status, body: text });
    }

    let parsed: WireChatResponse =
        serde_json::from_str(&text).map_err(|e| format!("malformed completion body: {e}"))?;
    let usage = parsed.usage.unwrap_or_default();
    let content = parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .unwrap_or_default();
    Ok(SendOutcome::Success(WireCompletion {
        text: content,
        prompt_tokens: usage.prompt_tokens,
        completion_tokens: usage.completion_tokens,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completions_url_joins_cleanly() {
        assert_eq!(
            completions_url("http://localhost:8000/v1/"),
            "http://localhost:8000/v1/chat/completions"
        );
        assert_eq!(
            completions_url("http://localhost:8000/v1"),
            "http://localhost:8000/v1/chat/completions"
        );
    }

    #[test]
    fn excerpt_truncates_long_bodies() {
        let long = "x".repeat(500);
        assert!(excerpt(&long).chars().count() <= 201);
        assert_eq!(excerpt("short"), "short");
    }

    #[test]
    fn limiter_tracks_peak() {
        let limiter = AgentLimiter::new(2);
        limiter.acquire();
        limiter.acquire();
        assert_eq!(limiter.peak(), 2);
        limiter.release();
        limiter.release();
        assert_eq!(limiter.peak(), 2);
    }
}
