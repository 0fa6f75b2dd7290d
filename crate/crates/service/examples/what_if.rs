//! Drives the API in process: create a session, solve it, then ask what
//! happens when one server fails more often and when capacity doubles.

use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use havnfp::instgen::{generate, GeneratorConfig};
use havnfp::model::InstanceDoc;
use havnfp_service::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: Value) -> Value {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).unwrap();
    println!("{method} {uri} -> {status}");
    value
}

#[tokio::main]
async fn main() {
    let app = router(AppState::new(ServiceConfig {
        sync_window: Duration::from_secs(120),
        ..ServiceConfig::default()
    }));
    let instance = generate(&GeneratorConfig::new(40, 2, 1.5, 7)).unwrap();
    let doc = InstanceDoc::from_instance(&instance);
    let busiest = doc.servers[0].name.clone();

    let created = call(&app, "POST", "/v1/sessions", serde_json::to_value(&doc).unwrap()).await;
    let id = created["id"].as_str().unwrap();
    let solved = call(
        &app,
        "POST",
        &format!("/v1/sessions/{id}/solve"),
        json!({"algorithm": "vns", "timeLimit": 0.5, "seed": 1}),
    )
    .await;
    println!("  A_min = {}", solved["report"]["objective"]);

    for (label, delta) in [
        (
            format!("{busiest} drops to 0.95"),
            json!({"kind": "setAvailability", "target": {"type": "server", "name": busiest}, "value": 0.95}),
        ),
        ("every capacity doubles".to_string(), json!({"kind": "scaleCapacity", "factor": 2.0})),
    ] {
        let out = call(
            &app,
            "POST",
            &format!("/v1/sessions/{id}/whatif"),
            json!({"delta": delta, "commit": false, "timeLimit": 0.5}),
        )
        .await;
        println!("  {label}: A_min {} -> {}", out["old"]["objective"], out["new"]["objective"]);
        println!("  worst set gains {} and loses {}", out["worst"]["added"], out["worst"]["removed"]);
        let moved = out["changes"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["old"] != c["new"])
            .count();
        println!("  {moved} requests changed availability");
    }
}
