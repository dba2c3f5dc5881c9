//! Content-addressed response cache: one JSON file per entry, keyed by the
//! request digest, pretty-printed so recorded runs can be inspected and
//! checked into fixtures.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{cache_key, ChatRequest, GatewayError};

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CachedExchange {
    pub request: CachedRequest,
    pub response: CachedResponse,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CachedRequest {
    pub model_name: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub system_message: String,
    pub user_message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct CachedResponse {
    pub text: String,
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

impl CachedRequest {
    fn from_request(request: &ChatRequest) -> Self {
        Self {
            model_name: request.agent.model_name.clone(),
            temperature: request.agent.temperature,
            max_output_tokens: request.agent.max_output_tokens,
            system_message: request.system_message.clone(),
            user_message: request.user_message.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| GatewayError::Cache {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub(crate) fn load(&self, key: &str) -> Result<Option<CachedResponse>, GatewayError> {
        let path = self.entry_path(key);
        let raw = match std::fs::read_to_string(&path) {
            Ok(raw) => raw,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(GatewayError::Cache {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            }
        };
        let exchange: CachedExchange =
            serde_json::from_str(&raw).map_err(|e| GatewayError::Cache {
                path: path.display().to_string(),
                message: format!("corrupt cache entry: {e}"),
            })?;
        Ok(Some(exchange.response))
    }

    pub(crate) fn store(
        &self,
        key: &str,
        request: &ChatRequest,
        response: CachedResponse,
    ) -> Result<(), GatewayError> {
        let path = self.entry_path(key);
        let exchange = CachedExchange {
            request: CachedRequest::from_request(request),
            response,
        };
        let body = serde_json::to_string_pretty(&exchange).expect("cache entries serialize");
        // write-then-rename keeps concurrent writers of the same key atomic;
        // the temp name must be unique per writer, not just per process
        static WRITE_SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        let seq = WRITE_SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp = self
            .dir
            .join(format!(".{key}.tmp.{}.{seq}", std::process::id()));
        std::fs::write(&tmp, body).map_err(|e| GatewayError::Cache {
            path: tmp.display().to_string(),
            message: e.to_string(),
        })?;
        std::fs::rename(&tmp, &path).map_err(|e| GatewayError::Cache {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(())
    }

    /// Record a canned completion for a request, as if the wire call had
    /// happened. This is how fixture corpora are prepared for offline
    /// replay.
    pub fn seed(&self, request: &ChatRequest, text: &str) -> Result<(), GatewayError> {
        self.store(
            &cache_key(request),
            request,
            CachedResponse {
                text: text.to_string(),
                prompt_tokens: 0,
                completion_tokens: 0,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::AgentSpec;

    fn request() -> ChatRequest {
        let agent = AgentSpec::new("a", "m", "http://localhost:1");
        ChatRequest::new(&agent, "sys", "user")
    }

    #[test]
    fn round_trips_an_entry() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path()).unwrap();
        let req = request();
        cache.seed(&req, "canned text").unwrap();
        let hit = cache.load(&cache_key(&req)).unwrap().unwrap();
        assert_eq!(hit.text, "canned text");
    }

    #[test]
    fn miss_returns_none() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path()).unwrap();
        assert!(cache.load("0000").unwrap().is_none());
    }

    #[test]
    fn entries_are_human_inspectable_json() {
        let dir = tempfile::tempdir().unwrap();
        let cache = DiskCache::new(dir.path()).unwrap();
        let req = request();
        cache.seed(&req, "visible").unwrap();
        let path = dir.path().join(format!("{}.json", cache_key(&req)));
        let raw = std::fs::read_to_string(path).unwrap();
        assert!(raw.contains("\"user_message\": \"user\""));
        assert!(raw.contains("visible"));
    }
}
