use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use ctgs_core::{TokenCatalog, UniformModel};
use ctgs_service::{router, AppState, ModelRegistry};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn registry() -> ModelRegistry {
    let mut r = ModelRegistry::new();
    let small = Arc::new(TokenCatalog::builder(["a", "b", "c", "d"]).build().unwrap());
    r.register("uniform", small, Arc::new(UniformModel::new(4)));
    let words = Arc::new(TokenCatalog::builder(["cat", "hat", "the", "then", "dog"]).build().unwrap());
    r.register("words", words, Arc::new(UniformModel::new(5)));
    r
}

fn app() -> Router {
    router(AppState::new(registry()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(v) => req.body(Body::from(v.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn create(app: &Router, body: Value) -> String {
    let (status, d) = call(app, "POST", "/v1/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{d}");
    d["id"].as_str().unwrap().to_string()
}

fn assert_error(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].is_string());
    assert!(v["details"].is_object());
}

#[tokio::test]
async fn create_returns_an_empty_descriptor() {
    let app = app();
    let (status, d) =
        call(&app, "POST", "/v1/sessions", Some(json!({ "model": "uniform", "filters": ["banned_words=d"] }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(d["model"], "uniform");
    assert_eq!(d["filters"], json!(["banned_words=d"]));
    assert_eq!(d["text"], "");
    assert_eq!(d["context"], json!([]));
    assert_eq!(d["allowed_count"], 3);
    assert_eq!(d["strategy"], "greedy");
    assert_eq!(d["seed"], 0);
    let id = d["id"].as_str().unwrap();
    assert_eq!(id.len(), 36);
    let (status, again) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(again, d);
}

#[tokio::test]
async fn default_model_and_presets() {
    let app = app();
    let (_, d) = call(&app, "POST", "/v1/sessions", Some(json!({ "preset": "lipogram-e" }))).await;
    assert_eq!(d["model"], "uniform");
    assert_eq!(d["filters"], json!(["ban_letters=e"]));
    let (status, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "preset": "haiku" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "unknown_preset");
}

#[tokio::test]
async fn create_errors_are_structured() {
    let app = app();
    let (status, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "filters": ["syllables=banana"] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "filter_parse_error");
    assert_eq!(v["details"]["item"], "syllables=banana");

    let (_, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "filters": ["semantic=ocean:0.5"] }))).await;
    assert_error(&v, "missing_resource");
    assert_eq!(v["details"]["resource"], "embeddings");

    let (status, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "model": "gpt" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "unknown_model");

    let (status, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "filters": [], "colour": "red" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_error(&v, "invalid_request");

    let (_, v) = call(&app, "POST", "/v1/sessions", Some(json!({ "strategy": "topk:0" }))).await;
    assert_error(&v, "invalid_request");
}

#[tokio::test]
async fn uniform_continuations() {
    let app = app();
    let id = create(&app, json!({ "model": "uniform" })).await;
    let (status, v) = call(&app, "GET", &format!("/v1/sessions/{id}/continuations?m=4"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["allowed_count"], 4);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for (i, e) in entries.iter().enumerate() {
        assert_eq!(e["probability"], 0.25);
        assert_eq!(e["token_id"], i);
    }
    assert_eq!(entries[0]["token"], "a");
    assert!(entries[0].get("syllables").is_some() && entries[0].get("rhyme_key").is_some());

    let (_, v) = call(&app, "GET", &format!("/v1/sessions/{id}/continuations?m=0"), None).await;
    assert_error(&v, "invalid_request");
    let (_, v) = call(&app, "GET", &format!("/v1/sessions/{id}/continuations?m=x"), None).await;
    assert_error(&v, "invalid_request");
}

#[tokio::test]
async fn dead_end_names_the_rejecting_spec() {
    let app = app();
    let id = create(&app, json!({ "model": "words", "filters": ["ban_letters=aeo"] })).await;
    let (status, v) = call(&app, "GET", &format!("/v1/sessions/{id}/continuations"), None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "dead_end");
    assert_eq!(v["details"]["allowed_count"], 0);
    let rejections = v["details"]["top_rejections"].as_array().unwrap();
    assert_eq!(rejections.len(), 5);
    assert!(rejections.iter().all(|r| r["rejected_by"] == "ban_letters=aeo"));
}

#[tokio::test]
async fn unknown_session() {
    let app = app();
    for uri in [
        "/v1/sessions/00000000-0000-0000-0000-000000000000",
        "/v1/sessions/not-a-uuid/continuations",
    ] {
        let (status, v) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_error(&v, "unknown_session");
    }
    let (status, v) = call(
        &app,
        "POST",
        "/v1/sessions/00000000-0000-0000-0000-000000000000/actions",
        Some(json!({ "type": "undo" })),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&v, "unknown_session");
}

#[tokio::test]
async fn accept_then_undo_restores_the_descriptor() {
    let app = app();
    let id = create(&app, json!({ "model": "words", "filters": ["ban_letters=e"] })).await;
    let actions = format!("/v1/sessions/{id}/actions");
    let (_, before) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;

    let (status, v) = call(&app, "POST", &actions, Some(json!({ "type": "accept", "token": "cat" }))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["session"]["text"], "cat");
    assert_eq!(v["session"]["context"], json!([{ "id": 0, "token": "cat", "forced": false }]));
    assert!(v.get("generated").is_none());

    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "undo", "steps": 1 }))).await;
    assert_eq!(v["session"], before);

    let (status, v) = call(&app, "POST", &actions, Some(json!({ "type": "accept", "token_id": 2 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "token_not_allowed");
    assert_eq!(v["details"]["rejected_by"], "ban_letters=e");

    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "accept", "token_id": 2, "forced": true }))).await;
    assert_eq!(v["session"]["context"][0]["forced"], true);

    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "accept", "token_id": 99 }))).await;
    assert_error(&v, "unknown_token");
    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "accept" }))).await;
    assert_error(&v, "invalid_request");
}

#[tokio::test]
async fn undo_past_beginning() {
    let app = app();
    let id = create(&app, json!({ "model": "uniform" })).await;
    let actions = format!("/v1/sessions/{id}/actions");
    call(&app, "POST", &actions, Some(json!({ "type": "generate", "n": 2 }))).await;
    let (status, v) = call(&app, "POST", &actions, Some(json!({ "type": "undo", "steps": 5 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "undo_past_beginning");
    assert_eq!(v["details"], json!({ "requested": 5, "available": 2 }));
}

#[tokio::test]
async fn generate_is_all_or_nothing() {
    let app = app();
    let id = create(&app, json!({ "model": "words", "filters": ["ban_letters=e"], "strategy": "temp:1", "seed": 3 })).await;
    let actions = format!("/v1/sessions/{id}/actions");
    let (status, v) = call(&app, "POST", &actions, Some(json!({ "type": "generate", "n": 6 }))).await;
    assert_eq!(status, StatusCode::OK);
    let generated = v["generated"].as_array().unwrap();
    assert_eq!(generated.len(), 6);
    assert!(generated.iter().all(|t| !t["token"].as_str().unwrap().contains('e')));
    assert_eq!(v["session"]["history_len"], 6);

    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "set_filters", "filters": ["ban_letters=aeo"] }))).await;
    assert_eq!(v["session"]["filters"], json!(["ban_letters=aeo"]));
    assert_eq!(v["session"]["history_len"], 6);
    assert_eq!(v["session"]["allowed_count"], 0);
    let (_, before) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    let (status, v) = call(&app, "POST", &actions, Some(json!({ "type": "generate", "n": 3 }))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_error(&v, "dead_end");
    let (_, after) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(before, after);

    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "generate", "n": 0 }))).await;
    assert_error(&v, "invalid_request");
    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "generate", "n": 1, "beam": 4 }))).await;
    assert_error(&v, "invalid_request");
    let (_, v) = call(&app, "POST", &actions, Some(json!({ "type": "set_filters", "filters": ["nope"] }))).await;
    assert_error(&v, "filter_parse_error");
}

#[tokio::test]
async fn same_seed_same_generation_across_sessions() {
    let app = app();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let id = create(&app, json!({ "model": "words", "strategy": "topp:0.9", "seed": 11 })).await;
        let (_, v) =
            call(&app, "POST", &format!("/v1/sessions/{id}/actions"), Some(json!({ "type": "generate", "n": 20 }))).await;
        outputs.push(v["session"]["text"].clone());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[tokio::test]
async fn delete_and_expiry() {
    let app = app();
    let id = create(&app, json!({})).await;
    let (status, _) = call(&app, "DELETE", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let state = AppState::with_idle_timeout(registry(), Duration::from_millis(30));
    let app = router(state.clone());
    let id = create(&app, json!({})).await;
    assert_eq!(state.session_count(), 1);
    tokio::time::sleep(Duration::from_millis(60)).await;
    let (status, v) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{v}");
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn schema_and_health() {
    let app = app();
    let (status, v) = call(&app, "GET", "/v1/filters", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["filters"].as_array().unwrap().len(), 22);
    assert!(v["presets"].is_array() || v["presets"].is_object());
    let (status, v) = call(&app, "GET", "/v1/health", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert_eq!(v["models"], json!(["uniform", "words"]));
    let (status, v) = call(&app, "GET", "/v2/health", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_error(&v, "not_found");
}

#[tokio::test]
async fn concurrent_mutations_are_serialized() {
    let app = app();
    let id = create(&app, json!({ "model": "uniform", "strategy": "temp:1" })).await;
    let mut tasks = Vec::new();
    for _ in 0..16 {
        let app = app.clone();
        let uri = format!("/v1/sessions/{id}/actions");
        tasks.push(tokio::spawn(async move {
            call(&app, "POST", &uri, Some(json!({ "type": "generate", "n": 5 }))).await
        }));
    }
    let mut lengths = Vec::new();
    for t in tasks {
        let (status, v) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK);
        lengths.push(v["session"]["history_len"].as_u64().unwrap());
    }
    lengths.sort_unstable();
    assert_eq!(lengths, (1..=16).map(|i| i * 5).collect::<Vec<u64>>());
}
