//! Gateway behavior against a scripted local endpoint: caching, retries,
//! provider errors, temperature fallback, and the per-agent in-flight
//! ceiling.

mod common;

use std::sync::Arc;

use common::{agent, eval_dict, gateway, MockResponse, MockServer};
use resum_core::gateway::{
    cache_key, ChatRequest, Gateway, GatewayConfig, GatewayError, RetryPolicy,
};

fn request(server: &MockServer, user: &str) -> ChatRequest {
    let spec = agent("a1", "test-model", &server.url());
    ChatRequest::new(&spec, "system prompt", user)
}

#[test]
fn second_identical_request_is_served_from_cache() {
    let server = MockServer::fixed("canned answer");
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let req = request(&server, "hello");

    let first = gw.complete(&req).unwrap();
    assert!(!first.cached);
    assert_eq!(first.text, "canned answer");
    assert_eq!(first.prompt_tokens, 7);

    let second = gw.complete(&req).unwrap();
    assert!(second.cached);
    assert_eq!(second.latency_ms, 0);
    assert_eq!(second.text, first.text);
    assert_eq!(server.hits(), 1);
}

#[test]
fn warm_cache_replays_offline_across_instances() {
    let dir = tempfile::tempdir().unwrap();
    let req = {
        let server = MockServer::fixed("persisted");
        let gw = gateway(dir.path());
        let req = request(&server, "persist me");
        gw.complete(&req).unwrap();
        req
        // server dropped: endpoint is gone
    };
    let gw = gateway(dir.path());
    let replayed = gw.complete(&req).unwrap();
    assert!(replayed.cached);
    assert_eq!(replayed.text, "persisted");
}

#[test]
fn cache_keys_persist_across_processes_shape() {
    // the key is a pure function of the request fields, so two equal
    // requests built independently share an entry
    let spec = agent("a1", "m", "http://localhost:1/v1");
    let a = ChatRequest::new(&spec, "s", "u");
    let b = ChatRequest::new(&spec, "s", "u");
    assert_eq!(cache_key(&a), cache_key(&b));
}

#[test]
fn unreachable_endpoint_fails_after_retries() {
    let dir = tempfile::tempdir().unwrap();
    let config = GatewayConfig {
        cache_dir: dir.path().to_path_buf(),
        retry: RetryPolicy::no_backoff(2),
        max_in_flight_per_agent: 4,
    };
    let gw = Gateway::new(config).unwrap();
    // port 9 (discard) is closed on loopback
    let spec = agent("a1", "m", "http://127.0.0.1:9/v1");
    let req = ChatRequest::new(&spec, "s", "u");
    match gw.complete(&req) {
        Err(GatewayError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected transport error, got {other:?}"),
    }
}

#[test]
fn transient_statuses_are_retried() {
    let server = MockServer::start(|index, _| {
        if index == 0 {
            MockResponse::status(500, "{\"error\": \"boom\"}")
        } else if index == 1 {
            MockResponse::status(429, "slow down")
        } else {
            MockResponse::completion("recovered")
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let response = gw.complete(&request(&server, "retry me")).unwrap();
    assert_eq!(response.text, "recovered");
    assert_eq!(server.hits(), 3);
}

#[test]
fn non_transient_status_is_a_provider_error() {
    let server = MockServer::start(|_, _| MockResponse::status(404, "no such model"));
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    match gw.complete(&request(&server, "x")) {
        Err(GatewayError::Provider {
            status,
            body_excerpt,
        }) => {
            assert_eq!(status, 404);
            assert!(body_excerpt.contains("no such model"));
        }
        other => panic!("expected provider error, got {other:?}"),
    }
    assert_eq!(server.hits(), 1);
}

#[test]
fn rejected_temperature_falls_back_to_zero_once() {
    let seen_temperatures = Arc::new(std::sync::Mutex::new(Vec::new()));
    let record = seen_temperatures.clone();
    let server = MockServer::start(move |_, req| {
        record.lock().unwrap().push(req.temperature());
        if req.temperature() != 0.0 {
            MockResponse::status(400, "{\"error\": \"temperature below minimum\"}")
        } else {
            MockResponse::completion("cooled down")
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let response = gw.complete(&request(&server, "needs zero")).unwrap();
    assert_eq!(response.text, "cooled down");
    let temps = seen_temperatures.lock().unwrap();
    assert_eq!(temps.len(), 2);
    assert!(temps[0] > 0.0);
    assert_eq!(temps[1], 0.0);
}

#[test]
fn other_400s_do_not_trigger_temperature_fallback() {
    let server = MockServer::start(|_, _| MockResponse::status(400, "bad request body"));
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    assert!(matches!(
        gw.complete(&request(&server, "x")),
        Err(GatewayError::Provider { status: 400, .. })
    ));
    assert_eq!(server.hits(), 1);
}

#[test]
fn empty_completion_is_an_error_and_not_cached() {
    let server = MockServer::start(|index, _| {
        if index == 0 {
            MockResponse::completion("")
        } else {
            MockResponse::completion("second try")
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let req = request(&server, "x");
    assert!(matches!(
        gw.complete(&req),
        Err(GatewayError::EmptyCompletion)
    ));
    // nothing was cached, so the next call reaches the endpoint again
    let response = gw.complete(&req).unwrap();
    assert_eq!(response.text, "second try");
    assert_eq!(server.hits(), 2);
}

#[test]
fn empty_user_message_is_rejected_before_any_io() {
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let spec = agent("a1", "m", "http://127.0.0.1:9/v1");
    let req = ChatRequest::new(&spec, "s", "");
    assert!(matches!(
        gw.complete(&req),
        Err(GatewayError::InvalidRequest(_))
    ));
}

#[test]
fn api_key_from_named_env_var_reaches_the_wire() {
    let header = Arc::new(std::sync::Mutex::new(String::new()));
    let record = header.clone();
    let server = MockServer::start(move |_, req| {
        *record.lock().unwrap() = req
            .headers
            .get("authorization")
            .cloned()
            .unwrap_or_default();
        MockResponse::completion("ok")
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let mut spec = agent("a1", "m", &server.url());
    spec.api_key_env = Some("RESUM_TEST_API_KEY_GATEWAY".to_string());
    std::env::set_var("RESUM_TEST_API_KEY_GATEWAY", "sk-fixture");
    gw.complete(&ChatRequest::new(&spec, "s", "u")).unwrap();
    assert_eq!(header.lock().unwrap().as_str(), "Bearer sk-fixture");
}

#[test]
fn in_flight_requests_per_agent_never_exceed_the_ceiling() {
    let server = MockServer::start(|_, req| {
        std::thread::sleep(std::time::Duration::from_millis(40));
        MockResponse::completion(&format!("echo {}", req.user_message()))
    });
    let dir = tempfile::tempdir().unwrap();
    let config = GatewayConfig {
        cache_dir: dir.path().to_path_buf(),
        retry: RetryPolicy::no_backoff(0),
        max_in_flight_per_agent: 2,
    };
    let gw = Gateway::new(config).unwrap();
    let spec = agent("limited", "m", &server.url());

    std::thread::scope(|scope| {
        for i in 0..8 {
            let gw = &gw;
            let spec = spec.clone();
            scope.spawn(move || {
                let req = ChatRequest::new(&spec, "s", format!("call {i}"));
                gw.complete(&req).unwrap();
            });
        }
    });

    assert_eq!(gw.peak_in_flight("limited"), 2);
    assert!(server.peak_in_flight() <= 2, "server saw more than the ceiling");
    assert_eq!(server.hits(), 8);
}

#[test]
fn cached_fixture_can_be_seeded_for_offline_use() {
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let spec = agent("a1", "m", "http://127.0.0.1:9/v1"); // unroutable
    let req = ChatRequest::new(&spec, "sys", "offline question");
    gw.cache().seed(&req, &eval_dict(4, 5, 3, 4)).unwrap();
    let response = gw.complete(&req).unwrap();
    assert!(response.cached);
    assert!(response.text.contains("'clarity': 4"));
}
