//! Evaluation runner behavior against scripted agents: parsing with the
//! corrective retry, ensemble fan-out, and the three aggregation
//! strategies end to end.

mod common;

use common::{agent, eval_dict, gateway, MockResponse, MockServer};
use num_rational::Rational64;
use resum_core::evaluation::{AggregationStrategy, EvalError, Evaluator};
use resum_core::prompts::{Dimension, ParseError, PromptSet, CORRECTIVE_INSTRUCTION};

#[test]
fn single_agent_scores_are_parsed() {
    let server = MockServer::fixed(&eval_dict(4, 5, 3, 4));
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let spec = agent("judge", "judge-model", &server.url());

    let result = evaluator
        .evaluate_single(&spec, "the document", "the summary", "s1")
        .unwrap();
    assert_eq!(result.agent_id, "judge");
    assert_eq!(result.summary_id, "s1");
    assert_eq!(result.per_dimension[&Dimension::Clarity].score, 4);
    assert_eq!(result.per_dimension[&Dimension::Accuracy].score, 5);
    assert_eq!(result.per_dimension[&Dimension::Coverage].score, 3);
    assert_eq!(result.per_dimension[&Dimension::Overall].score, 4);
    assert_eq!(
        result.per_dimension[&Dimension::Coverage].rationale,
        "coverage note"
    );
}

#[test]
fn prose_answer_triggers_one_corrective_retry() {
    let server = MockServer::start(|_, req| {
        if req.user_message().ends_with(CORRECTIVE_INSTRUCTION) {
            MockResponse::completion(&eval_dict(3, 3, 3, 3))
        } else {
            MockResponse::completion("I think this summary is pretty good!")
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let spec = agent("judge", "m", &server.url());

    let result = evaluator
        .evaluate_single(&spec, "doc", "sum", "s1")
        .unwrap();
    assert_eq!(result.per_dimension[&Dimension::Clarity].score, 3);
    assert_eq!(server.hits(), 2);
}

#[test]
fn persistent_prose_is_an_evaluation_failure() {
    let server = MockServer::fixed("no dict here, ever");
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let spec = agent("judge", "m", &server.url());

    match evaluator.evaluate_single(&spec, "doc", "sum", "s1") {
        Err(EvalError::EvaluationFailed { agent_id, raw, source }) => {
            assert_eq!(agent_id, "judge");
            assert_eq!(raw, "no dict here, ever");
            assert_eq!(source, ParseError::NoObject);
        }
        other => panic!("expected evaluation failure, got {other:?}"),
    }
    assert_eq!(server.hits(), 2);
}

/// Serve a different verdict per model name, from one server.
fn per_model_server() -> MockServer {
    MockServer::start(|_, req| {
        let text = match req.model() {
            "model-a" => eval_dict(3, 4, 5, 4),
            "model-b" => eval_dict(4, 4, 5, 4),
            "model-c" => eval_dict(5, 4, 2, 4),
            other => panic!("unexpected model {other}"),
        };
        MockResponse::completion(&text)
    })
}

#[test]
fn averaging_produces_exact_rational_means() {
    let server = per_model_server();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let agents = vec![
        agent("a", "model-a", &server.url()),
        agent("b", "model-b", &server.url()),
        agent("c", "model-c", &server.url()),
    ];

    let aggregated = evaluator
        .evaluate_multi(&agents, &AggregationStrategy::Averaging, "doc", "sum", "s1")
        .unwrap();
    assert_eq!(aggregated.per_dimension[&Dimension::Clarity], Rational64::from_integer(4));
    assert_eq!(aggregated.per_dimension[&Dimension::Accuracy], Rational64::from_integer(4));
    assert_eq!(aggregated.per_dimension[&Dimension::Coverage], Rational64::from_integer(4));
    assert_eq!(aggregated.contributing.len(), 3);
    assert!(aggregated.leader_evaluation.is_none());
}

#[test]
fn majority_uses_mode_and_median_per_dimension() {
    let server = per_model_server();
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let agents = vec![
        agent("a", "model-a", &server.url()),
        agent("b", "model-b", &server.url()),
        agent("c", "model-c", &server.url()),
    ];

    let aggregated = evaluator
        .evaluate_multi(
            &agents,
            &AggregationStrategy::MajorityVoting,
            "doc",
            "sum",
            "s1",
        )
        .unwrap();
    // clarity {3,4,5}: three-way split -> median 4
    assert_eq!(aggregated.per_dimension[&Dimension::Clarity], Rational64::from_integer(4));
    // accuracy {4,4,4}: unanimity
    assert_eq!(aggregated.per_dimension[&Dimension::Accuracy], Rational64::from_integer(4));
    // coverage {5,5,2}: mode 5
    assert_eq!(aggregated.per_dimension[&Dimension::Coverage], Rational64::from_integer(5));
}

#[test]
fn leader_reads_anonymized_evaluations_and_decides() {
    let server = MockServer::start(|_, req| {
        let text = match req.model() {
            "model-a" => eval_dict(3, 4, 5, 4),
            "model-b" => eval_dict(4, 4, 5, 4),
            "model-c" => eval_dict(5, 4, 2, 4),
            "leader-model" => {
                // the leader prompt carries the anonymized evaluations
                assert!(req.user_message().contains("Evaluator 1"));
                assert!(req.user_message().contains("Evaluator 3"));
                assert!(!req.user_message().contains("model-a"));
                eval_dict(3, 4, 5, 4) // echo evaluator 1
            }
            other => panic!("unexpected model {other}"),
        };
        MockResponse::completion(&text)
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let agents = vec![
        agent("a", "model-a", &server.url()),
        agent("b", "model-b", &server.url()),
        agent("c", "model-c", &server.url()),
    ];
    let leader = agent("lead", "leader-model", &server.url());

    let aggregated = evaluator
        .evaluate_multi(
            &agents,
            &AggregationStrategy::LeaderBased { leader },
            "doc",
            "sum",
            "s1",
        )
        .unwrap();
    assert_eq!(aggregated.per_dimension[&Dimension::Clarity], Rational64::from_integer(3));
    assert_eq!(aggregated.per_dimension[&Dimension::Coverage], Rational64::from_integer(5));
    assert_eq!(aggregated.contributing.len(), 3);
    assert!(aggregated.leader_rationale.is_some());
    assert!(aggregated.leader_evaluation.is_some());
}

#[test]
fn leader_score_out_of_range_fails_with_range_error() {
    let server = MockServer::start(|_, req| {
        let text = match req.model() {
            "leader-model" => eval_dict(9, 4, 4, 4), // out of the 1..5 scale
            _ => eval_dict(4, 4, 4, 4),
        };
        MockResponse::completion(&text)
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let agents = vec![
        agent("a", "model-a", &server.url()),
        agent("b", "model-b", &server.url()),
    ];
    let leader = agent("lead", "leader-model", &server.url());

    match evaluator.evaluate_multi(
        &agents,
        &AggregationStrategy::LeaderBased { leader },
        "doc",
        "sum",
        "s1",
    ) {
        Err(EvalError::EvaluationFailed { source, .. }) => {
            assert!(matches!(source, ParseError::Range { ref key, .. } if key == "clarity"));
        }
        other => panic!("expected range failure, got {other:?}"),
    }
}

#[test]
fn one_failing_agent_aborts_the_ensemble() {
    let server = MockServer::start(|_, req| {
        if req.model() == "model-b" {
            MockResponse::completion("never a dict")
        } else {
            MockResponse::completion(&eval_dict(4, 4, 4, 4))
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let agents = vec![
        agent("a", "model-a", &server.url()),
        agent("b", "model-b", &server.url()),
        agent("c", "model-c", &server.url()),
    ];

    match evaluator.evaluate_multi(&agents, &AggregationStrategy::Averaging, "doc", "sum", "s1") {
        Err(EvalError::PartialFailure { failed }) => {
            assert_eq!(failed.len(), 1);
            assert_eq!(failed[0].0, "b");
        }
        other => panic!("expected partial failure, got {other:?}"),
    }
}

#[test]
fn degenerate_single_agent_ensemble_matches_single_evaluation() {
    let server = MockServer::fixed(&eval_dict(2, 3, 4, 5));
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let spec = agent("solo", "m", &server.url());

    let single = evaluator
        .evaluate_single(&spec, "doc", "sum", "s1")
        .unwrap();
    let ensemble = evaluator
        .evaluate_multi(
            std::slice::from_ref(&spec),
            &AggregationStrategy::Averaging,
            "doc",
            "sum",
            "s1",
        )
        .unwrap();
    for (&dimension, entry) in &single.per_dimension {
        assert_eq!(
            ensemble.per_dimension[&dimension],
            Rational64::from_integer(entry.score)
        );
    }
}

#[test]
fn leader_with_one_agent_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let gw = gateway(dir.path());
    let prompts = PromptSet::builtin();
    let evaluator = Evaluator::new(&gw, &prompts);
    let solo = vec![agent("a", "m", "http://127.0.0.1:9/v1")];
    let leader = agent("lead", "m2", "http://127.0.0.1:9/v1");
    assert!(matches!(
        evaluator.evaluate_multi(
            &solo,
            &AggregationStrategy::LeaderBased { leader },
            "doc",
            "sum",
            "s1"
        ),
        Err(EvalError::TooFew)
    ));
}
