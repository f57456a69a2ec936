//! Drives the HTTP API in process. `planeguide serve` exposes the same router.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use planeguide::geometry::SpDirection;
use planeguide::registration::RegistrationConfig;
use planeguide::service::{router, AppState, ServiceOptions};
use planeguide::volume::generate_phantom;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn post(app: &axum::Router, uri: &str, body: Value) -> Value {
    let req = Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let (volume, planes) = generate_phantom(0, [48, 48, 48]).unwrap();
    let tvp = planes[0].pose(SpDirection::Pos);
    let app = router(
        Arc::new(AppState::new(Some((volume, planes)), RegistrationConfig::default())),
        &ServiceOptions::default(),
    );

    let slice = post(&app, "/api/slice", json!({ "pose": tvp })).await;
    println!(
        "slice {}x{}, {} base64 chars",
        slice["width"],
        slice["height"],
        slice["pixels_b64"].as_str().unwrap().len()
    );
    let guidance = post(&app, "/api/guidance", json!({ "pose": tvp, "sp_id": "TCP" })).await;
    println!("TVP -> TCP: {guidance}");
}
