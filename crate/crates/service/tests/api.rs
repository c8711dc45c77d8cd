use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use catbox_core::CampaignConfig;
use catbox_service::{router, AppState, CampaignStore};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(dir: &std::path::Path) -> Router {
    let store = CampaignStore::open(dir).unwrap();
    router(Arc::new(AppState::new(store, CampaignConfig::default())))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

async fn call_json(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (s, text) = call(app, method, uri, body).await;
    (s, serde_json::from_str(&text).unwrap_or(Value::String(text)))
}

fn fast_config(n_init: usize) -> Value {
    json!({"n_init": n_init, "seed": 4, "cont_restarts": 2, "cont_steps": 16,
           "kernel": {"hyper": {"restarts": 1, "max_iters": 10}}})
}

fn small_space() -> Value {
    json!({
        "categoricals": [{"name": "catalyst", "levels": ["Pd", "Ni", "Cu"]}],
        "continuous": [{"name": "temp", "lower": 20.0, "upper": 80.0}]
    })
}

async fn create(app: &Router, n_init: usize) -> (String, Vec<Value>) {
    let (s, v) = call_json(app, "POST", "/campaigns", Some(json!({"space": small_space(), "config": fast_config(n_init)}))).await;
    assert_eq!(s, StatusCode::CREATED, "{v}");
    (v["id"].as_str().unwrap().to_string(), v["initial_design"].as_array().unwrap().clone())
}

#[tokio::test]
async fn create_ocm_shaped_space_defaults_to_twenty_points() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let space = json!({
        "categoricals": [
            {"name": "precursor", "levels": ["a", "b", "c"]},
            {"name": "support", "levels": ["s1", "s2"]},
            {"name": "promoter", "levels": ["p1", "p2", "p3", "p4"]},
            {"name": "method", "levels": ["m1", "m2"]}
        ],
        "continuous": [
            {"name": "t", "lower": 600.0, "upper": 900.0},
            {"name": "ratio", "lower": 1.0, "upper": 8.0},
            {"name": "flow", "lower": 10.0, "upper": 50.0},
            {"name": "loading", "lower": 0.5, "upper": 5.0}
        ]
    });
    let (s, v) = call_json(&app, "POST", "/campaigns", Some(json!({"space": space}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let pts = v["initial_design"].as_array().unwrap();
    assert_eq!(pts.len(), 20);
    for p in pts {
        assert_eq!(p["cat"].as_array().unwrap().len(), 4);
        let t = p["con"][0].as_f64().unwrap();
        assert!((600.0..=900.0).contains(&t));
    }
    assert_eq!(v["id"].as_str().unwrap().len(), 32);
}

#[tokio::test]
async fn create_rejects_bad_spaces_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let bad_bounds = json!({"space": {"continuous": [{"name": "temp", "lower": 5.0, "upper": 5.0}]}});
    let (s, v) = call_json(&app, "POST", "/campaigns", Some(bad_bounds)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "temp");
    assert!(v["error"].as_str().unwrap().contains("temp"));

    let dup = json!({"space": {"categoricals": [{"name": "x", "levels": ["a", "b"]}],
                               "continuous": [{"name": "x", "lower": 0.0, "upper": 1.0}]}});
    let (s, v) = call_json(&app, "POST", "/campaigns", Some(dup)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "x");

    let (s, _) = call(&app, "POST", "/campaigns", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call_json(&app, "POST", "/campaigns", Some(json!({"space": {}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, v) = call_json(&app, "POST", "/campaigns", Some(json!({"space": small_space(), "config": {"n_init": 0}}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["field"], "config");

    let (_, v) = call_json(&app, "GET", "/campaigns", None).await;
    assert_eq!(v, json!([]));
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let id = "0123456789abcdef0123456789abcdef";
    for (m, uri) in [
        ("GET", format!("/campaigns/{id}")),
        ("GET", format!("/campaigns/{id}/export.csv")),
        ("POST", format!("/campaigns/{id}/suggest")),
        ("GET", "/campaigns/not-an-id".to_string()),
    ] {
        let (s, _) = call(&app, m, &uri, None).await;
        assert_eq!(s, StatusCode::NOT_FOUND, "{m} {uri}");
    }
    let (s, _) = call(&app, "POST", &format!("/campaigns/{id}/tell"), Some(json!({"point": {"cat": [0], "con": [30.0]}, "y": 1.0}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn ask_tell_contract() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, design) = create(&app, 3).await;

    let (s, _) = call(&app, "POST", &format!("/campaigns/{id}/suggest"), None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let tell = format!("/campaigns/{id}/tell");
    for (point, y) in [(json!({"cat": [5], "con": [30.0]}), 1.0), (json!({"cat": [0], "con": [99.0]}), 1.0), (json!({"cat": [0]}), 1.0)] {
        let (s, _) = call(&app, "POST", &tell, Some(json!({"point": point, "y": y}))).await;
        assert_eq!(s, StatusCode::CONFLICT);
    }
    let (s, _) = call(&app, "POST", &tell, Some(json!({"y": 1.0}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let mut best = f64::NEG_INFINITY;
    for (i, p) in design.iter().enumerate() {
        let y = [0.5, 2.0, 1.0][i];
        let (s, v) = call_json(&app, "POST", &tell, Some(json!({"point": p, "y": y}))).await;
        assert_eq!(s, StatusCode::OK, "{v}");
        best = best.max(y);
        assert_eq!(v["incumbent"]["y"].as_f64().unwrap(), best);
        assert_eq!(v["n_observations"], i + 1);
        assert_eq!(v["observation"]["tag"], "init");
    }
    let (s, _) = call(&app, "POST", &tell, Some(json!({"point": design[0], "y": 1.0, "iteration": 1}))).await;
    assert_eq!(s, StatusCode::CONFLICT);

    let (_, v) = call(&app, "GET", &format!("/campaigns/{id}/export.csv"), None).await;
    assert_eq!(v.lines().count(), 4);
    assert_eq!(v.lines().next().unwrap(), "iteration,point_json,raw_y,observed_y,incumbent_y");

    let (s, first) = call_json(&app, "POST", &format!("/campaigns/{id}/suggest"), None).await;
    assert_eq!(s, StatusCode::OK, "{first}");
    let (_, second) = call_json(&app, "POST", &format!("/campaigns/{id}/suggest"), None).await;
    assert_eq!(first, second);
    let (_, stored) = call_json(&app, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(stored["pending"], first);
    assert_eq!(stored["schema_version"], 1);

    let (s, v) = call_json(&app, "POST", &tell, Some(json!({"point": first["point"], "y": 5.0}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["incumbent"]["point"], first["point"]);
    assert_eq!(v["observation"]["tag"], "suggested");

    // A fresh router over the same directory serves the same state.
    let (_, before) = call(&app, "GET", &format!("/campaigns/{id}"), None).await;
    let restarted = self::app(dir.path());
    let (_, after) = call(&restarted, "GET", &format!("/campaigns/{id}"), None).await;
    assert_eq!(before, after);
    let (_, ids) = call_json(&restarted, "GET", "/campaigns", None).await;
    assert_eq!(ids, json!([id]));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn concurrent_tells_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let app = app(dir.path());
    let (id, design) = create(&app, 6).await;
    let tell = format!("/campaigns/{id}/tell");
    let mut handles = Vec::new();
    for (i, p) in design.into_iter().enumerate() {
        let app = app.clone();
        let tell = tell.clone();
        handles.push(tokio::spawn(async move {
            call_json(&app, "POST", &tell, Some(json!({"point": p, "y": i as f64}))).await
        }));
    }
    let mut counts = Vec::new();
    for h in handles {
        let (s, v) = h.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        counts.push(v["n_observations"].as_u64().unwrap());
    }
    counts.sort();
    assert_eq!(counts, vec![1, 2, 3, 4, 5, 6]);
    let (_, c) = call_json(&app, "GET", &format!("/campaigns/{id}"), None).await;
    let iters: Vec<u64> = c["history"].as_array().unwrap().iter().map(|o| o["iteration"].as_u64().unwrap()).collect();
    assert_eq!(iters, vec![0, 1, 2, 3, 4, 5]);
}
