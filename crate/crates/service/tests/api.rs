use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use havnfp::greedy::SplitMode;
use havnfp::instgen::{generate, GeneratorConfig};
use havnfp::model::{InstanceDoc, InstanceBuilder};
use havnfp::placement::{check_constraints, PlacementExport};
use havnfp::Placement;
use havnfp_service::{delta, router, AppState, Delta, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(config: ServiceConfig) -> Router {
    router(AppState::new(config))
}

fn app() -> Router {
    app_with(ServiceConfig {
        sync_window: Duration::from_secs(600),
        ..ServiceConfig::default()
    })
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn doc(requests: usize, aps: usize, multiplier: f64, seed: u64) -> InstanceDoc {
    InstanceDoc::from_instance(&generate(&GeneratorConfig::new(requests, aps, multiplier, seed)).unwrap())
}

async fn create(app: &Router, doc: &InstanceDoc) -> String {
    let (status, body) = call(app, "POST", "/v1/sessions", Some(serde_json::to_value(doc).unwrap())).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["id"].as_str().unwrap().to_string()
}

/// Imports a placement returned by the API into the session's current
/// instance and runs the constraint checker on it.
async fn assert_valid_placement(app: &Router, id: &str, placement: &Value) {
    let (_, session) = call(app, "GET", &format!("/v1/sessions/{id}"), None).await;
    let doc: InstanceDoc = serde_json::from_value(session["instance"].clone()).unwrap();
    let inst = Arc::new(doc.to_instance().unwrap());
    let export: PlacementExport = serde_json::from_value(placement.clone()).unwrap();
    let p = Placement::import(inst, &export).unwrap();
    assert!(check_constraints(&p).is_empty(), "{:?}", check_constraints(&p));
}

#[tokio::test]
async fn solve_then_inspect() {
    let app = app();
    let id = create(&app, &doc(15, 2, 1.5, 1)).await;
    let (status, _) = call(&app, "GET", &format!("/v1/sessions/{id}/placement"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, out) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/solve"),
        Some(json!({"algorithm": "greedy", "policy": "bestfit", "split": "off"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["feasible"], true);
    assert_eq!(out["report"]["algorithm"], "greedy-bestfit");
    assert_valid_placement(&app, &id, &out["placement"]).await;

    let (status, placement) = call(&app, "GET", &format!("/v1/sessions/{id}/placement"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(placement, out["placement"]);

    let (status, avail) = call(&app, "GET", &format!("/v1/sessions/{id}/availability"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(avail["objective"], out["report"]["objective"]);
    let requests = avail["requests"].as_array().unwrap();
    assert_eq!(requests.len(), 15);
    for r in requests {
        let name = r["request"].as_str().unwrap();
        assert_eq!(r["availability"], out["report"]["perRequest"][name]);
        let product: f64 = r["fragments"].as_array().unwrap().iter().map(|f| f["availability"].as_f64().unwrap()).product();
        assert_eq!(product, r["availability"].as_f64().unwrap());
        for f in r["fragments"].as_array().unwrap() {
            let miss: f64 = f["clusters"].as_array().unwrap().iter().map(|t| 1.0 - t["term"].as_f64().unwrap()).product();
            assert!((1.0 - miss - f["availability"].as_f64().unwrap()).abs() < 1e-12);
        }
    }

    let (_, session) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["settings"]["algorithm"], "greedy");
    assert_eq!(session["busy"], false);
    assert_eq!(session["report"], out["report"]);
}

#[tokio::test]
async fn every_algorithm_answers() {
    let app = app();
    let id = create(&app, &doc(12, 1, 2.0, 4)).await;
    for body in [
        json!({"algorithm": "nextfit"}),
        json!({"algorithm": "vns", "seed": 3, "maxIterations": 50}),
        json!({"algorithm": "greedy", "policy": "firstfit", "split": "on"}),
    ] {
        let (status, out) = call(&app, "POST", &format!("/v1/sessions/{id}/solve"), Some(body.clone())).await;
        assert_eq!(status, StatusCode::OK, "{body}: {out}");
        assert_valid_placement(&app, &id, &out["placement"]).await;
    }

    let (status, out) = call(&app, "POST", &format!("/v1/sessions/{id}/solve"), Some(json!({"algorithm": "exact"}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{out}");

    let small = create(&app, &doc(3, 1, 1.5, 4)).await;
    let (status, out) = call(&app, "POST", &format!("/v1/sessions/{small}/solve"), Some(json!({"algorithm": "exact"}))).await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["optimal"], true);
    assert_valid_placement(&app, &small, &out["placement"]).await;
}

#[tokio::test]
async fn infeasible_solve_reports_feasible_false() {
    let mut b = InstanceBuilder::new();
    let c = b.cluster("c", 0.99);
    b.server("s1", c, 10.0, 0.99);
    let f = b.vnf("f", 0.99);
    let p = b.access_point("p");
    b.access_link(c, p, 0.99);
    b.request("r1", f, &[p], 6.0);
    b.request("r2", f, &[p], 6.0);
    let inst = b.build().unwrap();
    let app = app();
    let id = create(&app, &InstanceDoc::from_instance(&inst)).await;
    let (status, out) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/solve"),
        Some(json!({"algorithm": "greedy", "split": "off"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(out["feasible"], false);
    let (status, _) = call(&app, "GET", &format!("/v1/sessions/{id}/placement"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn invalid_documents_are_rejected() {
    let app = app();
    let mut bad = doc(3, 1, 1.5, 2);
    bad.servers[0].availability = 1.5;
    bad.requests[0].demand = -1.0;
    let (status, out) = call(&app, "POST", "/v1/sessions", Some(serde_json::to_value(&bad).unwrap())).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(out["errors"].as_array().unwrap().len(), 2, "{out}");

    let (status, _) = call(&app, "POST", "/v1/sessions", Some(json!({"clusters": 3}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(&app, "GET", "/v1/sessions/nope", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn removing_the_sole_request_is_vacuous() {
    let app = app();
    let d = doc(1, 1, 1.5, 9);
    let id = create(&app, &d).await;
    let name = d.requests[0].name.clone();
    let (status, out) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/whatif"),
        Some(json!({"delta": {"kind": "removeRequest", "name": name}, "commit": true})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["vacuous"], true);
    assert_eq!(out["new"]["objective"], 1.0);
    assert_eq!(out["new"]["vacuous"], true);
    assert!(out["old"]["objective"].as_f64().unwrap() < 1.0);
    assert_eq!(out["worst"]["removed"], json!([name]));
    assert_eq!(out["changes"], json!([{"request": name, "old": out["old"]["objective"], "new": null}]));
    assert_valid_placement(&app, &id, &out["placement"]).await;
}

#[tokio::test]
async fn perfect_components_give_perfect_availability() {
    let app = app();
    let id = create(&app, &doc(10, 2, 1.5, 5)).await;
    call(&app, "POST", &format!("/v1/sessions/{id}/solve"), Some(json!({"algorithm": "greedy"}))).await;
    let (status, out) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/whatif"),
        Some(json!({"delta": {"kind": "setAvailability", "target": {"type": "all"}, "value": 1.0}})),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{out}");
    assert_eq!(out["new"]["objective"], 1.0);
    assert!(out["old"]["objective"].as_f64().unwrap() < 1.0);
    assert_eq!(out["committed"], false);
    let (_, session) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["instance"], session["initial"]);
    assert!(session["history"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn doubling_capacity_never_lowers_the_minimum() {
    let app = app();
    for seed in 0..3 {
        let id = create(&app, &doc(50, 2, 1.25, seed)).await;
        let (status, before) = call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/solve"),
            Some(json!({"algorithm": "vns", "timeLimit": 0.5, "seed": seed})),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        let (status, out) = call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/whatif"),
            Some(json!({"delta": {"kind": "scaleCapacity", "factor": 2.0}, "timeLimit": 0.5})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{out}");
        assert_eq!(out["old"], before["report"]);
        assert!(out["new"]["objective"].as_f64().unwrap() >= out["old"]["objective"].as_f64().unwrap(), "{seed}");
        assert_valid_placement(&app, &id, &before["placement"]).await;
    }
}

#[tokio::test]
async fn history_replays_to_the_current_instance() {
    let app = app();
    let d = doc(30, 2, 1.5, 11);
    let id = create(&app, &d).await;
    let other = create(&app, &d).await;
    let deltas = [
        json!({"kind": "addRequest", "request": {"name": "extra", "vnf": d.vnf_types[1].name, "access_points": [d.access_points[0].name], "demand": 4.0}}),
        json!({"kind": "scaleCapacity", "servers": [d.servers[0].name], "factor": 0.5}),
        json!({"kind": "setAvailability", "target": {"type": "server", "name": d.servers[1].name}, "value": 0.9}),
        json!({"kind": "setAvailability", "target": {"type": "syncLink", "clusterA": d.clusters[1].name, "clusterB": d.clusters[0].name}, "value": 0.8}),
        json!({"kind": "setSplit", "split": "on"}),
        json!({"kind": "removeRequest", "name": d.requests[2].name}),
    ];
    for delta in &deltas {
        let (status, out) = call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/whatif"),
            Some(json!({"delta": delta, "commit": true, "timeLimit": 0.2})),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{out}");
        if out["feasible"] == true {
            assert_valid_placement(&app, &id, &out["placement"]).await;
        }
    }
    let (_, session) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["settings"]["split"], "on");
    let history: Vec<Delta> = session["history"]
        .as_array()
        .unwrap()
        .iter()
        .map(|h| serde_json::from_value(h["delta"].clone()).unwrap())
        .collect();
    assert_eq!(history.len(), deltas.len());
    let mut replay: InstanceDoc = serde_json::from_value(session["initial"].clone()).unwrap();
    let mut split = SplitMode::Fallback;
    for delta in &history {
        delta::apply(&mut replay, &mut split, delta).unwrap();
    }
    let current: InstanceDoc = serde_json::from_value(session["instance"].clone()).unwrap();
    assert_eq!(replay, current);
    assert_eq!(split, SplitMode::On);

    let (_, untouched) = call(&app, "GET", &format!("/v1/sessions/{other}"), None).await;
    assert_eq!(untouched["instance"], serde_json::to_value(&d).unwrap());
    assert!(untouched["history"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn invalid_deltas_are_rejected_without_side_effects() {
    let app = app();
    let d = doc(5, 1, 1.5, 2);
    let id = create(&app, &d).await;
    let bad = [
        json!({"kind": "removeRequest", "name": "ghost"}),
        json!({"kind": "setAvailability", "target": {"type": "cluster", "name": d.clusters[0].name}, "value": 1.5}),
        json!({"kind": "setAvailability", "target": {"type": "all"}, "value": 0.0}),
        json!({"kind": "scaleCapacity", "factor": -1.0}),
        json!({"kind": "addRequest", "request": {"name": "x", "vnf": "nope", "access_points": [], "demand": 1.0}}),
        json!({"kind": "teleport"}),
    ];
    for delta in bad {
        let (status, out) = call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/whatif"),
            Some(json!({"delta": delta, "commit": true})),
        )
        .await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{delta}");
        assert!(!out["errors"].as_array().unwrap().is_empty());
    }
    let (_, session) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["instance"], serde_json::to_value(&d).unwrap());
    assert_eq!(session["busy"], false);
}

#[tokio::test]
async fn concurrent_solves_conflict() {
    let app = app_with(ServiceConfig {
        sync_window: Duration::ZERO,
        ..ServiceConfig::default()
    });
    let id = create(&app, &doc(400, 2, 1.25, 8)).await;
    let (status, first) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/solve"),
        Some(json!({"algorithm": "vns", "timeLimit": 1.0})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let poll = first["poll"].as_str().unwrap().to_string();
    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{id}/solve"), Some(json!({"algorithm": "greedy"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/whatif"),
        Some(json!({"delta": {"kind": "scaleCapacity", "factor": 2.0}})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);

    let other = create(&app, &doc(5, 1, 1.5, 1)).await;
    let (status, _) = call(&app, "POST", &format!("/v1/sessions/{other}/solve"), Some(json!({"algorithm": "greedy"}))).await;
    assert!(status == StatusCode::OK || status == StatusCode::ACCEPTED);

    let done = loop {
        let (status, out) = call(&app, "GET", &poll, None).await;
        if status != StatusCode::ACCEPTED {
            assert_eq!(status, StatusCode::OK);
            break out;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    };
    assert_eq!(done["feasible"], true);
    assert_valid_placement(&app, &id, &done["placement"]).await;
    let (_, session) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(session["busy"], false);
    let (status, _) = call(&app, "GET", &format!("/v1/sessions/{id}/jobs/unknown"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_survive_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        sync_window: Duration::from_secs(600),
        persist_dir: Some(dir.path().to_path_buf()),
        ..ServiceConfig::default()
    };
    let app = app_with(config.clone());
    let id = create(&app, &doc(6, 2, 1.5, 3)).await;
    call(&app, "POST", &format!("/v1/sessions/{id}/solve"), Some(json!({"algorithm": "greedy"}))).await;
    call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/whatif"),
        Some(json!({"delta": {"kind": "scaleCapacity", "factor": 1.5}, "commit": true, "timeLimit": 0.1})),
    )
    .await;
    let (_, before) = call(&app, "GET", &format!("/v1/sessions/{id}"), None).await;

    let state = AppState::restore(config).unwrap();
    assert_eq!(state.session_ids(), vec![id.clone()]);
    let restarted = router(state);
    let (_, after) = call(&restarted, "GET", &format!("/v1/sessions/{id}"), None).await;
    assert_eq!(before, after);
}
