use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

use synstarts_cli::serve::{router, ReviewState};
use synstarts_core::review::{PairSource, ReviewStore};
use synstarts_core::TriageTag;

fn sources(prefix: &str, counts: [usize; 4]) -> Vec<PairSource> {
    TriageTag::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&tag, k)| {
            (0..k).map(move |i| PairSource {
                id: format!("{prefix}-{tag}-{i}"),
                tag,
                description: format!("{prefix} narrative {tag} {i}"),
            })
        })
        .collect()
}

fn app_with(store: ReviewStore) -> Router {
    let state = ReviewState::new(store, sources("syn", [40, 40, 40, 40]), sources("ext", [18, 11, 22, 3]), 20, false, 7);
    router(Arc::new(state), None)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() })
}

async fn new_session(app: &Router, rater: &str) -> String {
    let (status, v) = call(app, "POST", "/api/sessions", Some(json!({"rater_id": rater}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

/// Which side holds the synthetic narrative, judged from the test fixture text.
fn synthetic_side(q: &Value) -> &'static str {
    if q["left"].as_str().unwrap().starts_with("syn") {
        "left"
    } else {
        "right"
    }
}

#[tokio::test]
async fn full_session_flow() {
    let app = app_with(ReviewStore::in_memory());
    let id = new_session(&app, "rater-a").await;
    let (_, info) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(info["total"], 20);
    assert_eq!(info["status"], "open");

    let (status, _) = call(&app, "GET", &format!("/api/sessions/{id}/results"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    for i in 1..=20 {
        let (_, next) = call(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
        let q = &next["question"];
        assert_eq!(q["index"], i);
        // Wire blinding: exactly the documented fields, nothing hinting at the answer.
        let keys: Vec<&str> = q.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys.len(), 5, "{q}");
        serde_json::from_value::<synstarts_core::review::QuestionView>(q.clone()).unwrap();
        // Answer every odd question correctly.
        let side = synthetic_side(q);
        let chosen = if i % 2 == 1 { side } else if side == "left" { "right" } else { "left" };
        let (status, ack) =
            call(&app, "POST", &format!("/api/sessions/{id}/answers"), Some(json!({"index": i, "chosen": chosen}))).await;
        assert_eq!(status, StatusCode::OK, "{ack}");
        assert_eq!(ack["remaining"], 20 - i);
    }
    let (_, next) = call(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
    assert_eq!(next, json!({"status": "complete"}));

    let (status, err) =
        call(&app, "POST", &format!("/api/sessions/{id}/answers"), Some(json!({"index": 3, "chosen": "left"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "session_complete");

    let (status, res) = call(&app, "GET", &format!("/api/sessions/{id}/results"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["raters"][0]["correct"], 10);
    assert_eq!(res["chance_level"], 10.0);
    assert_eq!(res["averaged_confusion"], json!([[10.0, 10.0], [10.0, 10.0]]));
}

#[tokio::test]
async fn error_statuses() {
    let app = app_with(ReviewStore::in_memory());
    let (status, err) = call(&app, "GET", "/api/sessions/nope/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"], "unknown_session");

    let id = new_session(&app, "r").await;
    let uri = format!("/api/sessions/{id}/answers");
    let (status, _) = call(&app, "POST", &uri, Some(json!({"index": 21, "chosen": "left"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", &uri, Some(json!({"index": 1, "chosen": "left"}))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, err) = call(&app, "POST", &uri, Some(json!({"index": 1, "chosen": "right"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(err["error"], "already_answered");
    let (status, _) = call(&app, "POST", &uri, Some(json!({"index": 2, "chosen": "middle"}))).await;
    assert!(status.is_client_error());

    let (status, _) = call(&app, "POST", "/api/sessions", Some(json!({"rater_id": "r", "questions": 200}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
}

#[tokio::test]
async fn sessions_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let app = app_with(ReviewStore::open(&log).unwrap());
    let id = new_session(&app, "r").await;
    call(&app, "POST", &format!("/api/sessions/{id}/answers"), Some(json!({"index": 1, "chosen": "left"}))).await;
    drop(app);

    let app = app_with(ReviewStore::open(&log).unwrap());
    let (status, info) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(info["answered"], 1);
    let (_, next) = call(&app, "GET", &format!("/api/sessions/{id}/next"), None).await;
    assert_eq!(next["question"]["index"], 2);
}

#[tokio::test]
async fn random_raters_score_near_chance() {
    let app = app_with(ReviewStore::in_memory());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut ids = Vec::new();
    for r in 0..1000 {
        let id = new_session(&app, &format!("rater-{r}")).await;
        for i in 1..=20 {
            let chosen = if rng.random_bool(0.5) { "left" } else { "right" };
            let (status, _) =
                call(&app, "POST", &format!("/api/sessions/{id}/answers"), Some(json!({"index": i, "chosen": chosen})))
                    .await;
            assert_eq!(status, StatusCode::OK);
        }
        ids.push(id);
    }
    let (status, res) = call(&app, "GET", "/api/results", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["raters"].as_array().unwrap().len(), 1000);
    let mean = res["mean_correct"].as_f64().unwrap();
    assert!((mean - 10.0).abs() < 0.5, "mean correct {mean}");
    let (status, sub) = call(&app, "GET", &format!("/api/results?sessions={},{}", ids[0], ids[1]), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(sub["raters"].as_array().unwrap().len(), 2);
}
