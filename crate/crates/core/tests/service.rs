mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{random_fixture_with_edges, toy, Fixture};
use rankaudit::diagnosis::diagnose;
use rankaudit::sensitivity::{sweep, AuditConfig};
use rankaudit::service::{router, AppState, ServiceConfig};
use rankaudit::store::AuditCache;

struct Harness {
    app: axum::Router,
    fixture: Fixture,
}

impl Harness {
    fn new(fixture: Fixture, config: ServiceConfig) -> Self {
        let cache = AuditCache::from(sweep(&fixture.graph, &AuditConfig::default(), Some(1)).unwrap());
        let state = AppState::new(cache, fixture.graph.clone(), config).unwrap();
        Self {
            app: router(Arc::new(state)),
            fixture,
        }
    }

    async fn send(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if body.is_some() {
            req = req.header(header::CONTENT_TYPE, "application/json");
        }
        let req = req
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let (parts, body) = resp.into_parts();
        let bytes = axum::body::to_bytes(body, usize::MAX).await.unwrap();
        (parts.status, parts.headers, bytes.to_vec())
    }

    async fn get_json(&self, uri: &str) -> (StatusCode, Value) {
        let (status, _, body) = self.send(Method::GET, uri, None).await;
        (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
    }
}

fn error_code(v: &Value) -> (&str, Option<&str>) {
    (v["error"]["code"].as_str().unwrap(), v["error"]["param"].as_str())
}

#[tokio::test]
async fn summary_counts() {
    let h = Harness::new(toy(), ServiceConfig::default());
    let (status, v) = h.get_json("/api/summary").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v, serde_json::to_value(h.fixture.graph.summary()).unwrap());
    assert_eq!(v["nodeCount"], 6);
    assert_eq!(v["edgeCount"], 6);
}

#[tokio::test]
async fn sensitivity_sorting_and_pagination() {
    let h = Harness::new(toy(), ServiceConfig::default());
    let (_, v) = h.get_json("/api/sensitivity?sort=si&order=desc").await;
    let nodes: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["node"].as_str().unwrap()).collect();
    // si = 6, 2, 2, 0, 0, 0; ties by id
    assert_eq!(nodes, ["1", "4", "5", "2", "3", "6"]);

    let (_, page) = h.get_json("/api/sensitivity?sort=si&order=desc&offset=1&limit=2").await;
    assert_eq!(page["total"], 6);
    let nodes: Vec<&str> = page["records"].as_array().unwrap().iter().map(|r| r["node"].as_str().unwrap()).collect();
    assert_eq!(nodes, ["4", "5"]);

    let (_, by_rank) = h.get_json("/api/sensitivity").await;
    let ranks: Vec<u64> = by_rank["records"].as_array().unwrap().iter().map(|r| r["originalRank"].as_u64().unwrap()).collect();
    assert_eq!(ranks, [1, 2, 3, 4, 5, 6]);

    let (status, _) = h.get_json("/api/sensitivity?sort=perLabel:B").await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn bad_parameters_are_reported() {
    let h = Harness::new(toy(), ServiceConfig::default());
    for (uri, param) in [
        ("/api/sensitivity?sort=bogus", "sort"),
        ("/api/sensitivity?order=up", "order"),
        ("/api/sensitivity?limit=-1", "limit"),
        ("/api/perturbation/1?k=0", "k"),
        ("/api/perturbation/1?k=6", "k"),
        ("/api/perturbation/1/influence?hopMin=0", "hopMin"),
        ("/api/perturbation/1/influence?hopMax=nope", "hopMax"),
        ("/api/perturbation/1/influence?direction=sideways", "direction"),
    ] {
        let (status, v) = h.get_json(uri).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{uri}");
        assert_eq!(error_code(&v), ("invalid_parameter", Some(param)), "{uri}");
    }
    let (status, v) = h.get_json("/api/perturbation/zz").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v), ("unknown_node", Some("node")));
    let (status, v) = h.get_json("/api/sensitivity?sessionId=nope").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v).0, "unknown_session");
    let (status, v) = h.get_json("/api/nothing").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(error_code(&v).0, "not_found");
}

#[tokio::test]
async fn influence_filters() {
    let h = Harness::new(toy(), ServiceConfig::default());
    let (_, v) = h.get_json("/api/perturbation/4/influence?hopMin=1&hopMax=1").await;
    let nodes: Vec<&str> = v["nodes"].as_array().unwrap().iter().map(|n| n["node"].as_str().unwrap()).collect();
    assert_eq!(nodes, ["4", "1"]);
    let (_, v) = h.get_json("/api/perturbation/4/influence?direction=increased").await;
    let nodes: Vec<&str> = v["nodes"].as_array().unwrap().iter().map(|n| n["node"].as_str().unwrap()).collect();
    assert_eq!(nodes, ["4", "2"]);
    assert!(v["edges"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn rules_validation_and_session_lifecycle() {
    let h = Harness::new(toy(), ServiceConfig::default());
    let (status, _, body) = h.send(Method::POST, "/api/session", None).await;
    assert_eq!(status, StatusCode::CREATED);
    let id = serde_json::from_slice::<Value>(&body).unwrap()["sessionId"].as_str().unwrap().to_owned();
    let uri = format!("/api/session/{id}/rules");

    let unknown = json!([{"id": "r", "protected": ["99"], "direction": "no_decrease", "threshold": 0, "kind": "abs"}]);
    let (status, _, body) = h.send(Method::POST, &uri, Some(unknown)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(error_code(&v), ("unknown_node", Some("rules[0].protected")));

    let bad = json!([{"id": "r", "protected": ["1"], "direction": "no_decrease", "threshold": 150, "kind": "pct"}]);
    let (status, _, _) = h.send(Method::POST, &uri, Some(bad)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // protecting 2 from any drop excludes removing 1 (2 falls by 3) and removing 2 itself
    let ok = json!([{"id": "r", "protected": ["2"], "direction": "no_decrease", "threshold": 0, "kind": "abs"}]);
    let (status, _, body) = h.send(Method::POST, &uri, Some(ok)).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(v, json!({"sessionId": id, "rules": 1, "retained": 4}));

    let (_, v) = h.get_json(&format!("/api/sensitivity?sessionId={id}")).await;
    let nodes: Vec<&str> = v["records"].as_array().unwrap().iter().map(|r| r["node"].as_str().unwrap()).collect();
    assert_eq!(nodes, ["4", "3", "5", "6"]);

    // replacing with an empty list restores the full table
    let (_, _, body) = h.send(Method::POST, &uri, Some(json!([]))).await;
    assert_eq!(serde_json::from_slice::<Value>(&body).unwrap()["retained"], 6);

    let (status, _, _) = h.send(Method::DELETE, &format!("/api/session/{id}"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _, _) = h.send(Method::DELETE, &format!("/api/session/{id}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = h.send(Method::POST, &uri, Some(json!([]))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn larger_graph_report_equals_library() {
    let f = random_fixture_with_edges(136, 200, 1200);
    let h = Harness::new(f, ServiceConfig::default());
    let (status, _, body) = h.send(Method::GET, "/api/perturbation/n0136", None).await;
    assert_eq!(status, StatusCode::OK);
    let direct = diagnose(
        &h.fixture.graph,
        &AuditConfig::default().ranking,
        AuditConfig::default().mode,
        "n0136",
        100,
    )
    .unwrap();
    assert_eq!(body, serde_json::to_vec(&direct).unwrap());
}

#[tokio::test]
async fn cors_and_static_mount() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<html>ui</html>").unwrap();
    let h = Harness::new(
        toy(),
        ServiceConfig {
            static_dir: Some(dir.path().to_path_buf()),
            ..ServiceConfig::default()
        },
    );
    let (status, _, body) = h.send(Method::GET, "/", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<html>ui</html>");

    let req = Request::builder()
        .uri("/api/health")
        .header(header::ORIGIN, "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "*");
}
