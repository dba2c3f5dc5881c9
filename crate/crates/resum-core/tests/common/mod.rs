//! Shared test helpers: a small scripted chat-completions server and
//! fixture builders.
//!
//! Compiled into every integration test binary; not every binary uses
//! every helper.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use resum_core::gateway::{AgentSpec, Gateway, GatewayConfig, RetryPolicy};

/// One observed request: lowercased headers plus the parsed JSON body.
#[derive(Debug, Clone)]
pub struct SeenRequest {
    pub headers: BTreeMap<String, String>,
    pub body: serde_json::Value,
}

impl SeenRequest {
    pub fn model(&self) -> &str {
        self.body["model"].as_str().unwrap_or_default()
    }

    pub fn user_message(&self) -> &str {
        self.body["messages"]
            .as_array()
            .and_then(|msgs| msgs.iter().find(|m| m["role"] == "user"))
            .and_then(|m| m["content"].as_str())
            .unwrap_or_default()
    }

    pub fn temperature(&self) -> f64 {
        self.body["temperature"].as_f64().unwrap_or(f64::NAN)
    }
}

pub struct MockResponse {
    pub status: u16,
    pub body: String,
}

impl MockResponse {
    /// A well-formed chat completion carrying `text`.
    pub fn completion(text: &str) -> Self {
        Self {
            status: 200,
            body: serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": text}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 11}
            })
            .to_string(),
        }
    }

    pub fn status(status: u16, body: &str) -> Self {
        Self {
            status,
            body: body.to_string(),
        }
    }
}

type Responder = dyn Fn(usize, &SeenRequest) -> MockResponse + Send + Sync;

/// Minimal scripted HTTP/1.1 server for the chat-completions protocol.
pub struct MockServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    in_flight: Arc<AtomicUsize>,
    peak_in_flight: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(responder: F) -> Self
    where
        F: Fn(usize, &SeenRequest) -> MockResponse + Send + Sync + 'static,
    {
        Self::start_boxed(Box::new(responder))
    }

    /// Always answer with the same completion text.
    pub fn fixed(text: &str) -> Self {
        let text = text.to_string();
        Self::start(move |_, _| MockResponse::completion(&text))
    }

    fn start_boxed(responder: Box<Responder>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        let hits = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicUsize::new(0));
        let peak_in_flight = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let handle = {
            let hits = hits.clone();
            let in_flight = in_flight.clone();
            let peak = peak_in_flight.clone();
            let shutdown = shutdown.clone();
            let responder: Arc<Responder> = Arc::from(responder);
            std::thread::spawn(move || {
                let mut workers: Vec<JoinHandle<()>> = Vec::new();
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let hits = hits.clone();
                    let in_flight = in_flight.clone();
                    let peak = peak.clone();
                    let responder: Arc<Responder> = responder.clone();
                    workers.push(std::thread::spawn(move || {
                        let current = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                        peak.fetch_max(current, Ordering::SeqCst);
                        let index = hits.fetch_add(1, Ordering::SeqCst);
                        let prepared = read_and_prepare(stream, index, &*responder);
                        // decrement before writing: the client only issues
                        // its next request after it has read this response,
                        // so the counter can never race past the ceiling
                        in_flight.fetch_sub(1, Ordering::SeqCst);
                        if let Some((mut stream, payload)) = prepared {
                            let _ = stream.write_all(payload.as_bytes());
                            let _ = stream.flush();
                        }
                    }));
                }
                for worker in workers {
                    let _ = worker.join();
                }
            })
        };

        Self {
            addr,
            hits,
            in_flight,
            peak_in_flight,
            shutdown,
            handle: Some(handle),
        }
    }

    /// Endpoint URL in the form agents expect (no trailing path).
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    pub fn peak_in_flight(&self) -> usize {
        self.peak_in_flight.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr); // unblock accept
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
        let _ = self.in_flight.load(Ordering::SeqCst);
    }
}

/// Read one request and run the responder; the caller writes the payload.
fn read_and_prepare(
    stream: TcpStream,
    index: usize,
    responder: &Responder,
) -> Option<(TcpStream, String)> {
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() || request_line.is_empty() {
        return None;
    }
    let mut headers = BTreeMap::new();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).is_err() {
            return None;
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            let name = name.trim().to_lowercase();
            let value = value.trim().to_string();
            if name == "content-length" {
                content_length = value.parse().unwrap_or(0);
            }
            headers.insert(name, value);
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return None;
    }
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    let seen = SeenRequest { headers, body };
    let response = responder(index, &seen);

    let payload = format!(
        "HTTP/1.1 {} MOCK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        response.status,
        response.body.len(),
        response.body
    );
    Some((reader.into_inner(), payload))
}

pub fn agent(id: &str, model: &str, url: &str) -> AgentSpec {
    AgentSpec::new(id, model, url)
}

/// Gateway with retry delays removed, for fast tests.
pub fn gateway(cache_dir: &std::path::Path) -> Gateway {
    let config = GatewayConfig {
        cache_dir: cache_dir.to_path_buf(),
        retry: RetryPolicy::no_backoff(3),
        max_in_flight_per_agent: 4,
    };
    Gateway::new(config).expect("gateway")
}

/// The evaluation response dict in the schema the prompts mandate.
pub fn eval_dict(clarity: i64, accuracy: i64, coverage: i64, overall: i64) -> String {
    format!(
        "{{'clarity': {clarity}, 'accuracy': {accuracy}, 'coverage': {coverage}, 'overall': {overall}, \
         'explanation': {{'clarity': 'clarity note', 'accuracy': 'accuracy note', \
         'coverage': 'coverage note', 'overall': 'overall note'}}}}"
    )
}
