use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use planeguide::geometry::{Pose, Quaternion, SpDirection, StandardPlaneDef};
use planeguide::registration::RegistrationConfig;
use planeguide::service::{router, AppState, ServiceOptions};
use planeguide::volume::{generate_phantom, sample_slice, Volume};

fn phantom() -> (Volume, Vec<StandardPlaneDef>) {
    generate_phantom(0, [48, 48, 48]).unwrap()
}

fn app(loaded: Option<(Volume, Vec<StandardPlaneDef>)>) -> Router {
    let options = ServiceOptions::default();
    router(Arc::new(AppState::new(loaded, RegistrationConfig::default())), &options)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    let value: Value = serde_json::from_slice(&bytes).expect("every response is JSON");
    assert_eq!(value["schema_version"], 1, "{uri}: {value}");
    (status, value)
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    call(app, "POST", uri, Some(body.to_string())).await
}

#[tokio::test]
async fn volume_info_lists_planes() {
    let app = app(Some(phantom()));
    let (status, body) = call(&app, "GET", "/api/volume", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["dims"], json!([48, 48, 48]));
    assert_eq!(body["standard_planes"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn without_volume_answers_conflict() {
    let app = app(None);
    let pose = json!({"q": [1.0, 0.0, 0.0, 0.0], "delta": [0.0, 0.0, 0.0]});
    assert_eq!(call(&app, "GET", "/api/volume", None).await.0, StatusCode::CONFLICT);
    assert_eq!(post(&app, "/api/slice", json!({"pose": pose})).await.0, StatusCode::CONFLICT);
    assert_eq!(
        post(&app, "/api/guidance", json!({"pose": pose, "sp_id": "TVP"})).await.0,
        StatusCode::CONFLICT
    );
    assert_eq!(
        post(&app, "/api/simulate", json!({"sp_id": "TVP"})).await.0,
        StatusCode::CONFLICT
    );
}

#[tokio::test]
async fn unknown_route_is_404() {
    let app = app(Some(phantom()));
    let (status, body) = call(&app, "GET", "/api/nothing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].is_string());
    assert_eq!(call(&app, "GET", "/api/sessions/99", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400() {
    let app = app(Some(phantom()));
    let three = json!({"pose": {"q": [1.0, 0.0, 0.0], "delta": [0.0, 0.0, 0.0]}});
    let (status, body) = post(&app, "/api/slice", three).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().contains("malformed"));

    let not_unit = json!({"pose": {"q": [2.0, 0.0, 0.0, 0.0], "delta": [0.0, 0.0, 0.0]}, "sp_id": "TVP"});
    assert_eq!(post(&app, "/api/guidance", not_unit).await.0, StatusCode::BAD_REQUEST);
    let bad_sp = json!({"pose": {"q": [1.0, 0.0, 0.0, 0.0], "delta": [0.0, 0.0, 0.0]}, "sp_id": "XYZ"});
    assert_eq!(post(&app, "/api/guidance", bad_sp).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(
        call(&app, "POST", "/api/slice", Some("{not json".into())).await.0,
        StatusCode::BAD_REQUEST
    );
    let short = json!({"pixels_b64": BASE64.encode([0u8; 10]), "width": 4, "height": 4});
    assert_eq!(post(&app, "/api/register", short).await.0, StatusCode::BAD_REQUEST);
    let not_b64 = json!({"pixels_b64": "***", "width": 1, "height": 1});
    assert_eq!(post(&app, "/api/register", not_b64).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn guidance_at_the_plane_is_zero() {
    let (volume, planes) = phantom();
    let app = app(Some((volume, planes.clone())));
    for sp in &planes {
        for dir in [SpDirection::Pos, SpDirection::Neg] {
            let (status, body) = post(&app, "/api/guidance", json!({"pose": sp.pose(dir), "sp_id": sp.id})).await;
            assert_eq!(status, StatusCode::OK);
            assert!(body["angle"].as_f64().unwrap().abs() < 1e-9);
            assert_eq!(body["target_sp"], json!(sp.id));
            for t in body["translation"].as_array().unwrap() {
                assert!(t.as_f64().unwrap().abs() < 1e-9);
            }
        }
    }
}

#[tokio::test]
async fn slice_matches_library_and_round_trips_pose() {
    let (volume, planes) = phantom();
    let pose = Pose::new(
        Quaternion::from_rotation_vector([0.3, -0.2, 0.71]),
        [0.123456789012345, -0.1, 0.05],
    );
    let expected = sample_slice(&volume, &pose, 64, 64).to_u8();
    let app = app(Some((volume, planes)));
    let (status, body) = post(&app, "/api/slice", json!({"pose": pose, "width": 64, "height": 64})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["width"].as_u64(), body["height"].as_u64()), (Some(64), Some(64)));
    let pixels = BASE64.decode(body["pixels_b64"].as_str().unwrap()).unwrap();
    assert_eq!(pixels, expected);
    let echoed: Pose = serde_json::from_value(body["pose"].clone()).unwrap();
    for (a, b) in echoed.q.to_array().iter().zip(pose.q.to_array()) {
        assert!((a - b).abs() <= 1e-12);
    }
    for (a, b) in echoed.delta.iter().zip(pose.delta) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_slices_agree() {
    let app = app(Some(phantom()));
    let pose = Pose::new(Quaternion::new(0.9, 0.3, 0.3, 0.1).normalized(), [0.0, 0.1, 0.0]);
    let body = json!({ "pose": pose }).to_string();
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = app.clone();
            let body = body.clone();
            tokio::spawn(async move { call(&app, "POST", "/api/slice", Some(body)).await })
        })
        .collect();
    let mut outputs = Vec::new();
    for t in tasks {
        let (status, value) = t.await.unwrap();
        assert_eq!(status, StatusCode::OK, "{value}");
        outputs.push(value["pixels_b64"].as_str().unwrap().to_string());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[tokio::test]
async fn register_recovers_a_quantized_slice() {
    let (volume, planes) = generate_phantom(1, [64, 64, 64]).unwrap();
    let truth = Pose::new(
        (planes[0].q_pos * Quaternion::from_rotation_vector([0.2, 0.15, -0.1])).normalized(),
        [0.03, 0.02, 0.1],
    );
    let pixels = sample_slice(&volume, &truth, 160, 160).to_u8();
    let app = app(Some((volume, planes)));
    let (status, body) = post(
        &app,
        "/api/register",
        json!({"pixels_b64": BASE64.encode(&pixels), "width": 160, "height": 160}),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let pose: Pose = serde_json::from_value(body["pose"].clone()).unwrap();
    let err = planeguide::geometry::rotation_angle_3d(pose.q, truth.q).to_degrees();
    assert!(err < 5.0, "rotation error {err}");
    assert_eq!(body["degenerate"], false);

    let black = json!({"pixels_b64": BASE64.encode(vec![0u8; 32 * 32]), "width": 32, "height": 32});
    let (status, body) = post(&app, "/api/register", black).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["degenerate"], true);
}

#[tokio::test]
async fn simulate_returns_a_manifest() {
    let app = app(Some(phantom()));
    let (status, body) = post(&app, "/api/simulate", json!({"sp_id": "TVP", "seed": 3, "steps": 5})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["sp_index"], 4);
    assert_eq!(body["frames"].as_array().unwrap().len(), 5);
    assert_eq!(body["probe_q"].as_array().unwrap().len(), 5);
    let (again_status, again) = post(&app, "/api/simulate", json!({"sp_id": "TVP", "seed": 3, "steps": 5})).await;
    assert_eq!(again_status, StatusCode::OK);
    assert_eq!(body, again);
    assert_eq!(
        post(&app, "/api/simulate", json!({"sp_id": "TVP", "steps": 100000})).await.0,
        StatusCode::BAD_REQUEST
    );
}

#[tokio::test]
async fn sessions_track_pose_and_guidance() {
    let (volume, planes) = phantom();
    let tvp = planes[0];
    let app = app(Some((volume, planes)));
    let (status, created) = post(&app, "/api/sessions", json!({"sp_id": "TVP"})).await;
    assert_eq!(status, StatusCode::OK);
    let id = created["id"].as_u64().unwrap();
    assert!(created["guidance"]["angle"].as_f64().unwrap() > 0.0);

    let uri = format!("/api/sessions/{id}/pose");
    let (status, updated) = post(&app, &uri, json!({"pose": tvp.pose(SpDirection::Pos)})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(updated["guidance"]["angle"].as_f64().unwrap().abs() < 1e-9);

    let (status, fetched) = call(&app, "GET", &format!("/api/sessions/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(fetched, updated);
}
