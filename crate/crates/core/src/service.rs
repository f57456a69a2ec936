//! HTTP/JSON service over a shared, read-only volume.
//!
//! Every response body is a JSON object carrying `schema_version`. Request
//! bodies are parsed by hand so that any malformed payload answers 400.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::cli::{find_plane, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::evaluation::{simulate_scan, TrajectoryConfig};
use crate::geometry::{transform_to_sp, DirectionChoice, GuidanceInstruction, Pose, SpId, StandardPlaneDef};
use crate::registration::{register_slice, RegistrationConfig};
use crate::volume::{sample_slice, SliceImage, Volume, DEFAULT_SLICE_SIZE};

/// Largest slice side the service renders.
pub const MAX_SLICE_SIZE: usize = 1024;
/// Longest sweep `/api/simulate` produces.
pub const MAX_SIMULATE_STEPS: usize = 600;

#[derive(Debug, Clone, Default)]
pub struct ServiceOptions {
    pub cors: bool,
    pub assets: Option<PathBuf>,
    pub registration: RegistrationConfig,
}

/// Per-client state kept by the optional session endpoints.
#[derive(Debug, Clone, Serialize)]
pub struct SessionState {
    pub id: u64,
    pub volume: String,
    pub pose: Pose,
    pub sp_id: SpId,
    pub guidance: GuidanceInstruction,
}

struct Loaded {
    volume: Volume,
    planes: Vec<StandardPlaneDef>,
}

pub struct AppState {
    loaded: Option<Loaded>,
    registration: RegistrationConfig,
    sessions: Mutex<HashMap<u64, SessionState>>,
    next_session: AtomicU64,
}

impl AppState {
    pub fn new(loaded: Option<(Volume, Vec<StandardPlaneDef>)>, registration: RegistrationConfig) -> Self {
        AppState {
            loaded: loaded.map(|(volume, planes)| Loaded { volume, planes }),
            registration,
            sessions: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    fn loaded(&self) -> std::result::Result<&Loaded, ApiError> {
        self.loaded.as_ref().ok_or(ApiError {
            status: StatusCode::CONFLICT,
            message: "no volume loaded".into(),
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError {
            status,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "schema_version": SCHEMA_VERSION, "error": self.message })),
        )
            .into_response()
    }
}

type ApiResult = std::result::Result<Json<Value>, ApiError>;

fn reply<T: Serialize>(body: T) -> ApiResult {
    let mut value = serde_json::to_value(body).map_err(|e| ApiError::bad_request(e.to_string()))?;
    match value.as_object_mut() {
        Some(map) => {
            map.insert("schema_version".into(), SCHEMA_VERSION.into());
        }
        None => value = json!({ "schema_version": SCHEMA_VERSION, "value": value }),
    }
    Ok(Json(value))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> std::result::Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

fn checked_pose(pose: Pose) -> std::result::Result<Pose, ApiError> {
    pose.validate()?;
    Ok(pose)
}

pub fn router(state: Arc<AppState>, options: &ServiceOptions) -> Router {
    let mut app = Router::new()
        .route("/api/volume", get(volume_info))
        .route("/api/slice", post(slice))
        .route("/api/register", post(register))
        .route("/api/guidance", post(guidance))
        .route("/api/simulate", post(simulate))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/pose", post(update_session));
    app = match &options.assets {
        Some(dir) => app.fallback_service(ServeDir::new(dir).fallback(get(not_found).post(not_found))),
        None => app.fallback(not_found),
    };
    let app = app.with_state(state);
    if options.cors {
        app.layer(CorsLayer::permissive())
    } else {
        app
    }
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: &str, loaded: Option<(Volume, Vec<StandardPlaneDef>)>, options: ServiceOptions) -> Result<()> {
    let state = Arc::new(AppState::new(loaded, options.registration.clone()));
    let app = router(state, &options);
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::io(addr, e))?;
    eprintln!("listening on http://{addr}");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(addr, e))
}

async fn not_found() -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        message: "unknown route".into(),
    }
}

async fn volume_info(State(state): State<Arc<AppState>>) -> ApiResult {
    let loaded = state.loaded()?;
    reply(json!({
        "name": loaded.volume.name,
        "dims": loaded.volume.dims(),
        "standard_planes": loaded.planes,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SliceRequest {
    pose: Pose,
    #[serde(default)]
    width: Option<usize>,
    #[serde(default)]
    height: Option<usize>,
}

#[derive(Serialize)]
struct EncodedSlice {
    width: usize,
    height: usize,
    pixels_b64: String,
    pose: Pose,
}

fn encode(image: &SliceImage, pose: Pose) -> EncodedSlice {
    EncodedSlice {
        width: image.width,
        height: image.height,
        pixels_b64: BASE64.encode(image.to_u8()),
        pose,
    }
}

fn slice_size(value: Option<usize>) -> std::result::Result<usize, ApiError> {
    let size = value.unwrap_or(DEFAULT_SLICE_SIZE);
    if size == 0 || size > MAX_SLICE_SIZE {
        return Err(ApiError::bad_request(format!("slice size must lie in 1..={MAX_SLICE_SIZE}")));
    }
    Ok(size)
}

async fn slice(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let loaded = state.loaded()?;
    let req: SliceRequest = parse(&body)?;
    let pose = checked_pose(req.pose)?;
    let (w, h) = (slice_size(req.width)?, slice_size(req.height)?);
    let image = sample_slice(&loaded.volume, &pose, w, h);
    reply(encode(&image, pose))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegisterRequest {
    pixels_b64: String,
    width: usize,
    height: usize,
    #[serde(default)]
    config: Option<RegistrationConfig>,
}

async fn register(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    state.loaded()?;
    let req: RegisterRequest = parse(&body)?;
    let bytes = BASE64
        .decode(req.pixels_b64.as_bytes())
        .map_err(|e| ApiError::bad_request(format!("pixels_b64: {e}")))?;
    let image = SliceImage::from_u8(req.width, req.height, &bytes)?;
    let cfg = req.config.unwrap_or_else(|| state.registration.clone());
    cfg.validate()?;
    let worker = Arc::clone(&state);
    let result = tokio::task::spawn_blocking(move || {
        let loaded = worker.loaded.as_ref().expect("checked above");
        register_slice(&loaded.volume, &image, &cfg)
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })??;
    reply(result)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GuidanceRequest {
    pose: Pose,
    sp_id: SpId,
    #[serde(default = "auto")]
    direction: DirectionChoice,
}

fn auto() -> DirectionChoice {
    DirectionChoice::Auto
}

async fn guidance(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let loaded = state.loaded()?;
    let req: GuidanceRequest = parse(&body)?;
    let pose = checked_pose(req.pose)?;
    let sp = find_plane(&loaded.planes, req.sp_id)?;
    reply(transform_to_sp(&pose, sp, req.direction))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    sp_id: SpId,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default)]
    image_noise: f64,
}

fn default_steps() -> usize {
    TrajectoryConfig::default().steps
}

async fn simulate(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let req: SimulateRequest = parse(&body)?;
    if req.steps > MAX_SIMULATE_STEPS {
        return Err(ApiError::bad_request(format!("steps must not exceed {MAX_SIMULATE_STEPS}")));
    }
    let worker = Arc::clone(&state);
    let manifest = tokio::task::spawn_blocking(move || -> std::result::Result<Value, ApiError> {
        let loaded = worker.loaded()?;
        let sp = find_plane(&loaded.planes, req.sp_id)?;
        let cfg = TrajectoryConfig {
            steps: req.steps,
            image_noise: req.image_noise,
            rng_seed: req.seed,
            ..TrajectoryConfig::default()
        };
        let (scan, poses) = simulate_scan(&loaded.volume, sp, &cfg)?;
        let frames: Vec<EncodedSlice> = scan.frames.iter().zip(&poses).map(|(f, p)| encode(f, *p)).collect();
        Ok(json!({
            "sp_index": scan.sp_index,
            "sp_id": scan.sp_id,
            "probe_q": scan.probe_q,
            "frame_rate_hz": scan.frame_rate_hz,
            "poses": poses,
            "frames": frames,
        }))
    })
    .await
    .map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        message: e.to_string(),
    })??;
    reply(manifest)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    #[serde(default)]
    pose: Pose,
    sp_id: SpId,
}

fn session_state(loaded: &Loaded, id: u64, pose: Pose, sp_id: SpId) -> std::result::Result<SessionState, ApiError> {
    let pose = checked_pose(pose)?;
    let sp = find_plane(&loaded.planes, sp_id)?;
    Ok(SessionState {
        id,
        volume: loaded.volume.name.clone(),
        pose,
        sp_id,
        guidance: transform_to_sp(&pose, sp, DirectionChoice::Auto),
    })
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let loaded = state.loaded()?;
    let req: SessionRequest = parse(&body)?;
    let id = state.next_session.fetch_add(1, Ordering::Relaxed);
    let session = session_state(loaded, id, req.pose, req.sp_id)?;
    state.sessions.lock().expect("session map poisoned").insert(id, session.clone());
    reply(session)
}

fn unknown_session(id: u64) -> ApiError {
    ApiError {
        status: StatusCode::NOT_FOUND,
        message: format!("no session {id}"),
    }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<u64>) -> ApiResult {
    state.loaded()?;
    let sessions = state.sessions.lock().expect("session map poisoned");
    let session = sessions.get(&id).cloned().ok_or_else(|| unknown_session(id))?;
    reply(session)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionUpdate {
    pose: Pose,
    #[serde(default)]
    sp_id: Option<SpId>,
}

async fn update_session(State(state): State<Arc<AppState>>, Path(id): Path<u64>, body: Bytes) -> ApiResult {
    let loaded = state.loaded()?;
    let req: SessionUpdate = parse(&body)?;
    let mut sessions = state.sessions.lock().expect("session map poisoned");
    let current = sessions.get_mut(&id).ok_or_else(|| unknown_session(id))?;
    let updated = session_state(loaded, id, req.pose, req.sp_id.unwrap_or(current.sp_id))?;
    *current = updated.clone();
    reply(updated)
}
